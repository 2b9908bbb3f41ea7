#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dyirma/coalescent.hpp"
#include "support/stat_tests.hpp"

using namespace dyirma;

namespace {

// Five-tip heterochronous tree: season-1994 tips P (t0=0), Q,R (t1),
// season-1993 tips U (t3), V (t5); coalescences P+Q at t2, (PQ)+R at t4,
// (PQR)+U at t6, root at t7.
Genealogy figure_tree() {
  Genealogy g;
  g.n_taxa = 5;
  g.taxon_seasons = {1, 1, 1, 0, 0};  // 0 = 1993, 1 = 1994
  const std::vector<double> t = {0.0, 0.4, 0.9, 1.3, 1.8, 2.1, 2.9, 3.6};
  g.event_times = t;
  g.event_kinds = {CoalEventKind::Sampling,   // t1: Q,R
                   CoalEventKind::Coalescent, // t2: P+Q
                   CoalEventKind::Sampling,   // t3: U
                   CoalEventKind::Coalescent, // t4: (PQ)+R
                   CoalEventKind::Sampling,   // t5: V
                   CoalEventKind::Coalescent, // t6: (PQR)+U
                   CoalEventKind::Coalescent};// t7: root
  g.lineage_counts = {1, 3, 2, 3, 2, 3, 2};
  g.intervals.resize(7);
  for (int e = 0; e < 7; ++e) g.intervals[e] = t[e + 1] - t[e];
  // nodes: tips 0=P,1=Q,2=R,3=U,4=V; internal 5=(PQ),6=(PQR),7=(PQRU),8=root
  g.node_times = {0.0, 0.4, 0.4, 1.3, 2.1, 0.9, 1.8, 2.9, 3.6};
  g.parent = {5, 5, 6, 7, 8, 6, 7, 8, -1};
  g.children = {{0, 1}, {5, 2}, {6, 3}, {7, 4}};
  g.validate();
  return g;
}

Genealogy two_taxon_genealogy(double gamma1) {
  Genealogy g;
  g.n_taxa = 2;
  g.taxon_seasons = {0, 0};
  g.event_times = {0.0, gamma1};
  g.event_kinds = {CoalEventKind::Coalescent};
  g.lineage_counts = {2};
  g.intervals = {gamma1};
  g.node_times = {0.0, 0.0, gamma1};
  g.parent = {2, 2, -1};
  g.children = {{0, 1}};
  return g;
}

}  // namespace

TEST_CASE("two isochronous taxa at phi=1: mean TMRCA within 3 SE of 1") {
  const auto schedule = SamplingSchedule::regular({2}, 1.0);
  const auto traj = PopTrajectory::constant(1.0);
  RngEngine rng(2024);
  const int reps = 100000;
  double acc = 0.0, acc2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto g = simulate_genealogy(schedule, traj, rng);
    const double t = tmrca_of_subset(g, 0);
    acc += t;
    acc2 += t * t;
  }
  const double mean = acc / reps;
  const double var = acc2 / reps - mean * mean;
  const double se = std::sqrt(var / reps);
  CHECK(std::fabs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("three isochronous taxa at phi=1: mean TMRCA near 4/3") {
  const auto schedule = SamplingSchedule::regular({3}, 1.0);
  const auto traj = PopTrajectory::constant(1.0);
  RngEngine rng(77);
  const int reps = 100000;
  double acc = 0.0, acc2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto g = simulate_genealogy(schedule, traj, rng);
    const double t = tmrca_of_subset(g, 0);
    acc += t;
    acc2 += t * t;
  }
  const double mean = acc / reps;
  const double se = std::sqrt((acc2 / reps - mean * mean) / reps);
  CHECK(std::fabs(mean - 4.0 / 3.0) < 3.0 * se);
}

TEST_CASE("pair sampled 5 years apart coalesces before year 5 never") {
  SamplingSchedule s;
  s.sample_times = {0.0, 5.0};
  s.season_of_taxon = {0, 1};
  const auto traj = PopTrajectory::constant(2.5);
  RngEngine rng(5);
  for (int r = 0; r < 200; ++r) {
    const auto g = simulate_genealogy(s, traj, rng);
    CHECK(g.event_times.back() >= 5.0);
  }
}

TEST_CASE("fewer than 2 taxa is a domain error") {
  SamplingSchedule s;
  s.sample_times = {0.0};
  s.season_of_taxon = {0};
  RngEngine rng(1);
  CHECK_THROWS_AS(simulate_genealogy(s, PopTrajectory::constant(1.0), rng), DomainError);
}

TEST_CASE("simulation is reproducible for a fixed seed") {
  const auto schedule = SamplingSchedule::regular({3, 2, 4}, 0.8);
  const auto traj = PopTrajectory::constant(2.0);
  const auto a = simulate_genealogy(schedule, traj, 99u);
  const auto b = simulate_genealogy(schedule, traj, 99u);
  CHECK(a.event_times == b.event_times);
  CHECK(a.parent == b.parent);
  CHECK(a.lineage_counts == b.lineage_counts);
}

TEST_CASE("log density: analytic exponential cases") {
  const auto g1 = two_taxon_genealogy(1.0);
  CHECK(log_coalescent_density(g1, PopTrajectory::constant(1.0)) == doctest::Approx(-1.0));
  CHECK(log_coalescent_density(g1, PopTrajectory::constant(2.0)) ==
        doctest::Approx(std::log(0.5) - 0.5).epsilon(1e-12));
  const auto g0 = two_taxon_genealogy(0.0);
  CHECK(log_coalescent_density(g0, PopTrajectory::constant(1.0)) == doctest::Approx(0.0));
}

TEST_CASE("log density matches the analytic form to 1e-12 on random cases") {
  RngEngine rng(314);
  std::uniform_real_distribution<double> unif(0.05, 4.0);
  for (int r = 0; r < 100; ++r) {
    const double gamma1 = unif(rng);
    const double phi = unif(rng);
    const auto g = two_taxon_genealogy(gamma1);
    const double expected = -std::log(phi) - gamma1 / phi;  // Exp(1/phi) log pdf
    CHECK(std::fabs(log_coalescent_density(g, PopTrajectory::constant(phi)) - expected) <
          1e-12);
  }
}

TEST_CASE("two-taxon density integrates to one by quadrature") {
  const auto traj = PopTrajectory::constant(1.7);
  const int grid = 40000;
  const double hi = 60.0;
  const double h = hi / grid;
  double acc = 0.0;
  for (int i = 0; i <= grid; ++i) {
    const double x = i * h;
    const double f = std::exp(log_coalescent_density(two_taxon_genealogy(x), traj));
    acc += (i == 0 || i == grid) ? 0.5 * f : f;
  }
  acc *= h;
  CHECK(std::fabs(acc - 1.0) < 1e-4);
}

TEST_CASE("figure tree: season TMRCAs are interval sums") {
  const auto g = figure_tree();
  const auto& t = g.event_times;
  // 1994 (three tips, earliest event at t0, MRCA at t4)
  CHECK(tmrca_of_subset(g, 1) == doctest::Approx(t[4] - t[0]).epsilon(1e-12));
  // 1993 (two tips, first sampled at t3, MRCA at the root t7)
  CHECK(tmrca_of_subset(g, 0) == doctest::Approx(t[7] - t[3]).epsilon(1e-12));
}

TEST_CASE("subset conventions: singleton and full set") {
  const auto schedule = SamplingSchedule::regular({1, 3}, 1.0);
  const auto g = simulate_genealogy(schedule, PopTrajectory::constant(1.0), 7u);
  CHECK(tmrca_of_subset(g, 0) == 0.0);
  CHECK_THROWS_AS(tmrca_of_subset(g, 5), DomainError);
}

TEST_CASE("full-set TMRCA dominates every season subset") {
  const auto schedule = SamplingSchedule::regular({3, 3, 2}, 0.5);
  RngEngine rng(10);
  for (int r = 0; r < 200; ++r) {
    auto g = simulate_genealogy(schedule, PopTrajectory::constant(1.5), rng);
    const double whole = g.event_times.back() - g.event_times.front();
    for (int season = 0; season < 3; ++season) CHECK(whole >= tmrca_of_subset(g, season));
  }
}

TEST_CASE("intercoalescent intervals are exponential per lineage count") {
  // 4 isochronous taxa, phi = 2: first interval Exp(4*3/(2*2)) = Exp(3).
  const auto schedule = SamplingSchedule::regular({4}, 1.0);
  const auto traj = PopTrajectory::constant(2.0);
  RngEngine rng(11);
  const int reps = 100000;
  double acc = 0.0, acc2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto g = simulate_genealogy(schedule, traj, rng);
    acc += g.intervals[0];
    acc2 += g.intervals[0] * g.intervals[0];
  }
  const double mean = acc / reps;
  const double se = std::sqrt((acc2 / reps - mean * mean) / reps);
  CHECK(std::fabs(mean - 1.0 / 3.0) < 3.0 * se);
}

TEST_CASE("prior TMRCA samples: shape and degenerate-hyperprior distribution") {
  const auto schedule = SamplingSchedule::regular({2}, 1.0);

  PhiHyperprior fixed{1.0, 1.0, 1};
  const auto tiny = sample_prior_tmrca(schedule, fixed, 2, 5u);
  CHECK(tiny.sample_count() == 2);
  CHECK(tiny.seasons() == 1);

  const auto draws = sample_prior_tmrca(schedule, fixed, 10000, 42u);
  std::vector<double> col(draws.data.col(0).data(), draws.data.col(0).data() + 10000);
  const auto ks = statx::ks_test(col, [](double x) { return statx::exp_cdf(x, 1.0); });
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("phi ceiling is respected and unbounded configs rejected") {
  const auto schedule = SamplingSchedule::regular({2, 2}, 1.0);
  PhiHyperprior h{0.5, 8.0, 3};
  CHECK_NOTHROW(h.validate());
  // All phis bounded: simulate via the public surface and check TMRCAs stay
  // finite; the trajectory itself is internal, so probe via validate().
  PhiHyperprior bad;
  bad.phi_max = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  PhiHyperprior bad2;
  bad2.phi_min = 0.0;
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("prior sampling with multiple groups is reproducible and positive") {
  const auto schedule = SamplingSchedule::regular({2, 3}, 1.0);
  PhiHyperprior h{0.1, 50.0, 4};
  const auto a = sample_prior_tmrca(schedule, h, 50, 17u);
  const auto b = sample_prior_tmrca(schedule, h, 50, 17u);
  CHECK(a.data == b.data);
  CHECK((a.data.array() >= 0.0).all());
}
