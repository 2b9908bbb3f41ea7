#include "dyirma/realization_io.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dyirma {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_value(const std::string& tok, const std::string& file, int row, int col) {
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(file + ": row " + std::to_string(row) + ", column " +
                          std::to_string(col) + ": non-numeric entry '" + tok + "'");
  }
  if (!std::isfinite(v)) {
    throw ValidationError(file + ": row " + std::to_string(row) + ", column " +
                          std::to_string(col) + ": non-finite entry");
  }
  if (v < 0.0) {
    throw ValidationError(file + ": row " + std::to_string(row) + ", column " +
                          std::to_string(col) + ": negative time " + tok);
  }
  return v;
}

struct ParsedFile {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

ParsedFile read_matrix_file(const std::filesystem::path& path, int expected_seasons) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();

  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ParsedFile parsed;
  parsed.header = split_tabs(line);
  if (expected_seasons > 0 && static_cast<int>(parsed.header.size()) != expected_seasons) {
    throw FormatError(name + ": header has " + std::to_string(parsed.header.size()) +
                      " columns, expected " + std::to_string(expected_seasons));
  }
  const int cols = static_cast<int>(parsed.header.size());

  std::vector<std::vector<double>> rows;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split_tabs(line);
    if (static_cast<int>(toks.size()) != cols) {
      throw FormatError(name + ": row " + std::to_string(row_no) + " has " +
                        std::to_string(toks.size()) + " columns, expected " +
                        std::to_string(cols));
    }
    std::vector<double> vals(cols);
    for (int c = 0; c < cols; ++c) vals[c] = parse_value(toks[c], name, row_no, c + 1);
    rows.push_back(std::move(vals));
  }
  parsed.values.resize(static_cast<long>(rows.size()), cols);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < cols; ++c) parsed.values(static_cast<long>(r), c) = rows[r][c];
  return parsed;
}

void check_season_order(const std::vector<std::string>& labels, const std::string& context) {
  auto numeric = [](const std::string& s, double& out) {
    const char* b = s.data();
    auto [ptr, ec] = std::from_chars(b, b + s.size(), out);
    return ec == std::errc() && ptr == b + s.size();
  };
  for (size_t i = 1; i < labels.size(); ++i) {
    double a = 0, b = 0;
    bool increasing;
    if (numeric(labels[i - 1], a) && numeric(labels[i], b)) {
      increasing = a < b;
    } else {
      increasing = labels[i - 1] < labels[i];
    }
    if (!increasing) {
      throw ValidationError(context + ": season labels not strictly ordered ('" +
                            labels[i - 1] + "' then '" + labels[i] + "')");
    }
  }
}

}  // namespace

void RealizationStore::validate() const {
  if (data.empty()) throw ValidationError("realization store has no segments");
  if (static_cast<int>(segment_labels.size()) != segments())
    throw ValidationError("segment label count mismatch");
  const long rows = data[0].rows();
  const long cols = data[0].cols();
  if (cols != seasons()) throw ValidationError("season label count mismatch");
  for (int i = 0; i < segments(); ++i) {
    if (data[i].rows() != rows || data[i].cols() != cols) {
      throw ValidationError("segment " + segment_labels[i] + " has shape " +
                            std::to_string(data[i].rows()) + "x" + std::to_string(data[i].cols()) +
                            ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!data[i].allFinite() || (data[i].array() < 0.0).any())
      throw ValidationError("segment " + segment_labels[i] + " has invalid entries");
  }
  check_season_order(season_labels, "realization store");
}

void PriorSamples::validate() const {
  if (sample_count() < 2) throw ValidationError("at least 2 prior samples required");
  if (!data.allFinite() || (data.array() < 0.0).any())
    throw ValidationError("prior samples have invalid entries");
}

RealizationStore load_realizations(const std::filesystem::path& dir, int expected_seasons) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("realization directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .tsv realization files in " + dir.string());
  return load_realizations(files, expected_seasons);
}

RealizationStore load_realizations(const std::vector<std::filesystem::path>& files,
                                   int expected_seasons) {
  RealizationStore store;
  for (const auto& file : files) {
    if (!std::filesystem::exists(file)) throw IoError("missing file: " + file.string());
    ParsedFile parsed = read_matrix_file(file, expected_seasons);
    if (store.data.empty()) {
      store.season_labels = parsed.header;
    } else if (parsed.header != store.season_labels) {
      throw FormatError(file.string() + ": season header differs from previous segments");
    }
    store.data.push_back(std::move(parsed.values));
    store.segment_labels.push_back(file.stem().string());
  }
  store.validate();
  return store;
}

PriorSamples load_prior_samples(const std::filesystem::path& path, int expected_seasons) {
  if (!std::filesystem::exists(path)) throw IoError("missing prior file: " + path.string());
  ParsedFile parsed = read_matrix_file(path, expected_seasons);
  PriorSamples prior;
  prior.season_labels = parsed.header;
  prior.data = std::move(parsed.values);
  prior.validate();
  return prior;
}

void save_realization_file(const std::filesystem::path& path,
                           const std::vector<std::string>& season_labels,
                           const Eigen::MatrixXd& values) {
  if (values.cols() != static_cast<long>(season_labels.size()))
    throw ValidationError("column count does not match season labels");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (size_t j = 0; j < season_labels.size(); ++j) {
    if (j) out << '\t';
    out << season_labels[j];
  }
  out << '\n';
  for (long r = 0; r < values.rows(); ++r) {
    for (long c = 0; c < values.cols(); ++c) {
      if (c) out << '\t';
      out << format_double(values(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace dyirma
