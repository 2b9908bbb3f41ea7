#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dyirma/analysis.hpp"

using namespace dyirma;

namespace {

ChainTrace blank_trace(int rows, int segments, int seasons, CovKind kind = CovKind::IND) {
  ChainTrace t;
  t.cov_kind = kind;
  t.segments = segments;
  t.seasons = seasons;
  for (int r = 0; r < rows; ++r) {
    t.iterations.push_back(r + 1);
    t.alpha.push_back(Eigen::VectorXd::Zero(segments));
    t.beta.push_back(Eigen::VectorXd::Zero(seasons - 1));
    t.gamma.push_back(std::vector<int>(seasons - 1, 0));
    if (kind == CovKind::UNS) t.cov_matrix.push_back(Eigen::MatrixXd::Identity(segments,
                                                                               segments));
    else t.sigma2.push_back(1.0);
    if (cov_kind_has_rho(kind)) t.rho.push_back(0.5);
    std::vector<int> perm(segments);
    for (int i = 0; i < segments; ++i) perm[i] = i;
    t.perm.push_back(perm);
    t.selected.push_back(std::vector<int>(segments, 0));
  }
  return t;
}

std::vector<double> iid_normal(int n, double mean, double sd, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mean, sd);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

}  // namespace

TEST_CASE("geweke: constant series, drift, calibration, length guard") {
  CHECK(geweke_z(std::vector<double>(200, 3.25)) == 0.0);

  std::vector<double> drift(1000, 0.0);
  for (int i = 500; i < 1000; ++i) drift[i] = 10.0;
  CHECK(std::fabs(geweke_z(drift)) > 10.0);

  int inside = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto series = iid_normal(10000, 0.0, 1.0, 1000 + rep);
    const double z = geweke_z(series);
    CHECK(std::fabs(z) < 4.0);
    if (std::fabs(z) < 2.0) ++inside;
  }
  CHECK(inside >= 88);

  CHECK_THROWS_AS(geweke_z(std::vector<double>(50, 1.0)), DomainError);
}

TEST_CASE("rhat: identical chains, null calibration, gross separation") {
  const auto base = iid_normal(10000, 0.0, 1.0, 5);
  CHECK(rhat({base, base}) == doctest::Approx(std::sqrt(9999.0 / 10000.0)).epsilon(1e-12));
  CHECK(rhat({base, base}) < 1.0);

  const auto other = iid_normal(10000, 0.0, 1.0, 6);
  const double r = rhat({base, other});
  CHECK(r > 0.99);
  CHECK(r < 1.01);

  auto shifted = base;
  for (auto& x : shifted) x += 100.0;
  CHECK(rhat({base, shifted}) > 5.0);

  CHECK_THROWS_AS(rhat({base}), DomainError);
  CHECK_THROWS_AS(rhat({{1.0, 2.0}, {1.0, 2.0}}), DomainError);
}

TEST_CASE("rhat is invariant to chain relabeling, split variant works") {
  const auto a = iid_normal(2000, 0.0, 1.0, 7);
  const auto b = iid_normal(2000, 0.1, 1.1, 8);
  const auto c = iid_normal(2000, -0.05, 0.9, 9);
  CHECK(rhat({a, b, c}) == rhat({c, a, b}));
  CHECK(rhat({a, b}, true) == doctest::Approx(rhat({a, b}, true)));
}

TEST_CASE("conditional beta summary: always-on and never-on indicators") {
  auto t = blank_trace(50, 2, 3);
  for (int r = 0; r < 50; ++r) {
    t.gamma[r][0] = 1;
    t.beta[r](0) = 2.0;
  }
  const auto on = conditional_mean_beta({t}, 0);
  CHECK(on.inclusion_prob == 1.0);
  REQUIRE(on.cond_mean.has_value());
  CHECK(*on.cond_mean == 2.0);
  CHECK(on.cond_bci->first == 2.0);
  CHECK(on.cond_bci->second == 2.0);

  const auto off = conditional_mean_beta({t}, 1);
  CHECK(off.inclusion_prob == 0.0);
  CHECK(!off.cond_mean.has_value());
}

TEST_CASE("absolute timecourse: flat and single-iteration cases") {
  auto t = blank_trace(10, 2, 4);
  for (int r = 0; r < 10; ++r) t.alpha[r].setConstant(2.0);
  for (int j = 0; j < 4; ++j) CHECK(absolute_timecourse({t}, j) == doctest::Approx(2.0));

  auto s = blank_trace(1, 2, 3);
  s.alpha[0] << 1.0, 3.0;
  s.beta[0](0) = 1.0;
  s.gamma[0][0] = 1;
  CHECK(absolute_timecourse({s}, 1) == doctest::Approx(3.0));  // mean(alpha)=2 plus jump 1
}

TEST_CASE("model posterior probabilities: exact, at-least, empty pattern, partition") {
  auto t = blank_trace(40, 2, 4);
  for (int r = 0; r < 40; ++r) t.gamma[r] = {0, 0, 1};
  CHECK(model_posterior_prob({t}, {2}, PatternRestrict::Exact) == 1.0);
  CHECK(model_posterior_prob({t}, {}, PatternRestrict::Exact) == 0.0);
  CHECK(model_posterior_prob({t}, {}, PatternRestrict::AtLeast) == 1.0);
  CHECK(model_posterior_prob({t}, {0}, PatternRestrict::Exact) == 0.0);

  std::mt19937_64 rng(17);
  auto random_trace = blank_trace(500, 2, 4);
  for (int r = 0; r < 500; ++r)
    for (int j = 0; j < 3; ++j) random_trace.gamma[r][j] = static_cast<int>(rng() % 2);
  double total = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<int> on;
    for (int j = 0; j < 3; ++j)
      if (mask & (1 << j)) on.push_back(j);
    total += model_posterior_prob({random_trace}, on, PatternRestrict::Exact);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("neighbor probability: identity permutation, symmetry, adjacency count") {
  auto t = blank_trace(30, 4, 3, CovKind::TRI);
  const auto p01 = neighbor_probability({t}, 0, 1, 0.2);
  CHECK(p01.conditional == 1.0);
  CHECK(p01.rho_exceed_prob == 1.0);
  CHECK(neighbor_probability({t}, 0, 2, 0.2).conditional == 0.0);
  CHECK(neighbor_probability({t}, 1, 0, 0.2).conditional ==
        neighbor_probability({t}, 0, 1, 0.2).conditional);

  // every permutation has exactly n-1 adjacent pairs
  std::mt19937_64 rng(3);
  auto shuffled = blank_trace(20, 5, 3, CovKind::TRI);
  for (int r = 0; r < 20; ++r)
    std::shuffle(shuffled.perm[r].begin(), shuffled.perm[r].end(), rng);
  double acc = 0.0;
  for (int a = 0; a < 5; ++a)
    for (int b = a + 1; b < 5; ++b)
      acc += neighbor_probability({shuffled}, a, b, 0.2).conditional;
  CHECK(acc == doctest::Approx(4.0).epsilon(1e-12));

  auto low = blank_trace(10, 4, 3, CovKind::TRI);
  for (auto& r : low.rho) r = 0.05;
  CHECK_THROWS_AS(neighbor_probability({low}, 0, 1, 0.2), DomainError);
  CHECK_THROWS_AS(neighbor_probability({blank_trace(5, 3, 3)}, 0, 1, 0.2), DomainError);
}

TEST_CASE("bayes factor arithmetic") {
  CHECK(bayes_factor(0.624, 0.0357) == doctest::Approx(17.5).epsilon(0.006));
  CHECK(bayes_factor(0.0741, 0.000600) == doctest::Approx(123.5).epsilon(0.005));
  for (double x : {0.3, 1.0, 42.0}) CHECK(bayes_factor(x, x) == 1.0);
  CHECK(bayes_factor(0.2, 0.4) * bayes_factor(0.4, 0.2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(bayes_factor(0.0, 0.5), DomainError);
  CHECK_THROWS_AS(bayes_factor(0.5, -1.0), DomainError);
}

TEST_CASE("shrinkage: uniform selection reproduces stratified summaries") {
  const int m = 400;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(5.0, 1.0);
  RealizationStore store;
  store.season_labels = {"s1", "s2"};
  for (int i = 0; i < 2; ++i) {
    Eigen::MatrixXd seg(m, 2);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < 2; ++j) seg(r, j) = std::fabs(normal(rng));
    store.data.push_back(seg);
    store.segment_labels.push_back("seg" + std::to_string(i + 1));
  }

  auto t = blank_trace(3000, 2, 2);
  std::uniform_int_distribution<int> pick(0, m - 1);
  for (int r = 0; r < 3000; ++r)
    for (int i = 0; i < 2; ++i) t.selected[r][i] = pick(rng);

  const auto rows = shrinkage_table({t}, store);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    const double mc_se = 1.0 / std::sqrt(3000.0);
    CHECK(std::fabs(row.hier_mean - row.strat_mean) < 3.0 * mc_se);
  }
}

TEST_CASE("shrinkage: concentrated selection narrows the interval") {
  const int m = 500;
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(5.0, 1.0);
  RealizationStore store;
  store.season_labels = {"s1"};
  Eigen::MatrixXd seg(m, 1);
  for (int r = 0; r < m; ++r) seg(r, 0) = std::fabs(normal(rng));
  store.data.push_back(seg);
  store.segment_labels.push_back("seg1");

  // hierarchical model concentrated near 5: keep only draws within 0.3
  std::vector<int> close;
  for (int r = 0; r < m; ++r)
    if (std::fabs(seg(r, 0) - 5.0) < 0.3) close.push_back(r);
  REQUIRE(close.size() > 10);
  auto t = blank_trace(2000, 1, 1);
  for (int r = 0; r < 2000; ++r) t.selected[r][0] = close[r % close.size()];

  const auto rows = shrinkage_table({t}, store);
  CHECK(rows[0].hier_hi - rows[0].hier_lo < rows[0].strat_hi - rows[0].strat_lo);
}

TEST_CASE("shrinkage: an outlier segment is pulled toward the grand mean") {
  const int m = 500;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> hi(10.0, 1.0), lo(2.0, 0.5);
  RealizationStore store;
  store.season_labels = {"s1"};
  store.segment_labels = {"out", "a", "b", "c"};
  for (int i = 0; i < 4; ++i) {
    Eigen::MatrixXd seg(m, 1);
    for (int r = 0; r < m; ++r) seg(r, 0) = std::fabs(i == 0 ? hi(rng) : lo(rng));
    store.data.push_back(seg);
  }

  // Selected draws for the outlier segment lean toward its low tail, the way
  // a hierarchical model with a common mean reweights them.
  std::vector<std::pair<double, int>> ranked;
  for (int r = 0; r < m; ++r) ranked.push_back({store.data[0](r, 0), r});
  std::sort(ranked.begin(), ranked.end());
  auto t = blank_trace(2000, 4, 1);
  std::uniform_int_distribution<int> low_pick(0, m / 4);
  std::uniform_int_distribution<int> any_pick(0, m - 1);
  for (int r = 0; r < 2000; ++r) {
    t.selected[r][0] = ranked[low_pick(rng)].second;
    for (int i = 1; i < 4; ++i) t.selected[r][i] = any_pick(rng);
  }

  const auto rows = shrinkage_table({t}, store);
  const auto& out_row = rows[0];
  CHECK(out_row.grand_mean < out_row.hier_mean);
  CHECK(out_row.hier_mean < out_row.strat_mean);
}

TEST_CASE("shrinkage rejects selected indices outside the store") {
  RealizationStore store;
  store.season_labels = {"s1"};
  store.segment_labels = {"seg1"};
  Eigen::MatrixXd seg(3, 1);
  seg << 1.0, 2.0, 3.0;
  store.data.push_back(seg);
  auto t = blank_trace(4, 1, 1);
  t.selected[2][0] = 9;  // out of range
  CHECK_THROWS_WITH_AS(shrinkage_table({t}, store), doctest::Contains("corrupt"),
                       ValidationError);
}

TEST_CASE("trace parameter series extraction") {
  auto t = blank_trace(5, 2, 3, CovKind::CS);
  for (int r = 0; r < 5; ++r) {
    t.alpha[r] << r, 2 * r;
    t.sigma2[r] = 1.0 + r;
  }
  const auto names = trace_parameter_names(t);
  CHECK(std::find(names.begin(), names.end(), "sigma2") != names.end());
  CHECK(std::find(names.begin(), names.end(), "rho") != names.end());
  const auto a2 = trace_parameter_series(t, "alpha_2");
  CHECK(a2[3] == 6.0);
  const auto s2 = trace_parameter_series(t, "sigma2");
  CHECK(s2[4] == 5.0);
  CHECK_THROWS_AS(trace_parameter_series(t, "zeta_1"), DomainError);
}

TEST_CASE("intervals contain the mean for symmetric summaries, hdi is shortest") {
  const auto draws = iid_normal(5000, 3.0, 1.0, 41);
  const double lo = quantile(draws, 0.025);
  const double hi = quantile(draws, 0.975);
  const double mean = 3.0;
  CHECK(lo < mean);
  CHECK(hi > mean);
  const auto [hlo, hhi] = hdi_interval(draws, 0.95);
  CHECK(hhi - hlo <= hi - lo + 1e-9);
  CHECK(hlo < mean);
  CHECK(hhi > mean);
}
