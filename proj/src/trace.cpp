#include "dyirma/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dyirma/realization_io.hpp"

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

double to_double(const std::string& tok, const std::string& ctx) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(ctx + ": bad numeric field '" + tok + "'");
  return v;
}

long to_long(const std::string& tok, const std::string& ctx) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(ctx + ": bad integer field '" + tok + "'");
  return v;
}

int count_prefixed(const std::vector<std::string>& header, const std::string& prefix) {
  int count = 0;
  for (const auto& h : header)
    if (h.rfind(prefix, 0) == 0) ++count;
  return count;
}

}  // namespace

void ChainTrace::validate() const {
  const size_t r = iterations.size();
  if (alpha.size() != r || beta.size() != r || gamma.size() != r || perm.size() != r ||
      selected.size() != r)
    throw ValidationError("trace member lengths differ");
  const bool uns = cov_kind == CovKind::UNS;
  if (uns && cov_matrix.size() != r) throw ValidationError("trace covariance rows missing");
  if (!uns && sigma2.size() != r) throw ValidationError("trace sigma2 rows missing");
  if (cov_kind_has_rho(cov_kind) && rho.size() != r)
    throw ValidationError("trace rho rows missing");
  for (size_t t = 0; t < r; ++t) {
    if (alpha[t].size() != segments || beta[t].size() != seasons - 1 ||
        static_cast<int>(gamma[t].size()) != seasons - 1 ||
        static_cast<int>(perm[t].size()) != segments ||
        static_cast<int>(selected[t].size()) != segments)
      throw ValidationError("trace row " + std::to_string(t) + " has inconsistent shape");
  }
}

void save_trace(const ChainTrace& trace, const std::filesystem::path& path) {
  if (trace.empty()) throw ValidationError("empty trace");
  trace.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());

  const int n = trace.segments;
  const int jm1 = trace.seasons - 1;
  const bool uns = trace.cov_kind == CovKind::UNS;
  const bool has_rho = cov_kind_has_rho(trace.cov_kind);

  out << "iteration";
  for (int i = 0; i < n; ++i) out << "\talpha_" << (i + 1);
  for (int j = 0; j < jm1; ++j) out << "\tbeta_" << (j + 1);
  for (int j = 0; j < jm1; ++j) out << "\tgamma_" << (j + 1);
  if (uns) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) out << "\tcov_" << (i + 1) << "_" << (j + 1);
  } else {
    out << "\tsigma2";
    if (has_rho) out << "\trho";
  }
  for (int i = 0; i < n; ++i) out << "\tperm_" << (i + 1);
  for (int i = 0; i < n; ++i) out << "\tsel_" << (i + 1);
  out << '\n';

  for (int t = 0; t < trace.size(); ++t) {
    out << trace.iterations[t];
    for (int i = 0; i < n; ++i) out << '\t' << format_double(trace.alpha[t](i));
    for (int j = 0; j < jm1; ++j) out << '\t' << format_double(trace.beta[t](j));
    for (int j = 0; j < jm1; ++j) out << '\t' << trace.gamma[t][j];
    if (uns) {
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) out << '\t' << format_double(trace.cov_matrix[t](i, j));
    } else {
      out << '\t' << format_double(trace.sigma2[t]);
      if (has_rho) out << '\t' << format_double(trace.rho[t]);
    }
    for (int i = 0; i < n; ++i) out << '\t' << trace.perm[t][i];
    for (int i = 0; i < n; ++i) out << '\t' << trace.selected[t][i];
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ChainTrace load_trace(const std::filesystem::path& path, std::optional<CovKind> kind_hint,
                      int chain_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();

  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  if (header.empty() || header[0] != "iteration")
    throw FormatError(name + ": not a trace file (first column must be 'iteration')");

  ChainTrace trace;
  trace.chain_id = chain_id;
  trace.segments = count_prefixed(header, "alpha_");
  const int jm1 = count_prefixed(header, "beta_");
  trace.seasons = jm1 + 1;
  const bool uns = count_prefixed(header, "cov_") > 0;
  const bool has_rho = count_prefixed(header, "rho") > 0;
  if (uns) {
    trace.cov_kind = CovKind::UNS;
  } else if (!has_rho) {
    trace.cov_kind = CovKind::IND;
  } else {
    trace.cov_kind = kind_hint && cov_kind_has_rho(*kind_hint) ? *kind_hint : CovKind::CS;
  }
  if (trace.segments <= 0) throw FormatError(name + ": no alpha columns");

  const int n = trace.segments;
  const int cov_cols = uns ? n * (n + 1) / 2 : (has_rho ? 2 : 1);
  const int expected = 1 + n + 2 * jm1 + cov_cols + 2 * n;
  if (static_cast<int>(header.size()) != expected)
    throw FormatError(name + ": header has " + std::to_string(header.size()) +
                      " columns, expected " + std::to_string(expected));

  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split_tabs(line);
    if (static_cast<int>(toks.size()) != expected)
      throw FormatError(name + ": row " + std::to_string(row_no) + " has " +
                        std::to_string(toks.size()) + " columns, expected " +
                        std::to_string(expected));
    int c = 0;
    trace.iterations.push_back(to_long(toks[c++], name));
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a(i) = to_double(toks[c++], name);
    trace.alpha.push_back(std::move(a));
    Eigen::VectorXd b(jm1);
    for (int j = 0; j < jm1; ++j) b(j) = to_double(toks[c++], name);
    trace.beta.push_back(std::move(b));
    std::vector<int> g(jm1);
    for (int j = 0; j < jm1; ++j) g[j] = static_cast<int>(to_long(toks[c++], name));
    trace.gamma.push_back(std::move(g));
    if (uns) {
      Eigen::MatrixXd m(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          m(i, j) = to_double(toks[c++], name);
          m(j, i) = m(i, j);
        }
      trace.cov_matrix.push_back(std::move(m));
    } else {
      trace.sigma2.push_back(to_double(toks[c++], name));
      if (has_rho) trace.rho.push_back(to_double(toks[c++], name));
    }
    std::vector<int> p(n), s(n);
    for (int i = 0; i < n; ++i) p[i] = static_cast<int>(to_long(toks[c++], name));
    for (int i = 0; i < n; ++i) s[i] = static_cast<int>(to_long(toks[c++], name));
    trace.perm.push_back(std::move(p));
    trace.selected.push_back(std::move(s));
  }
  if (trace.empty()) throw ValidationError(name + ": empty trace");
  trace.validate();
  return trace;
}

}  // namespace dyirma
