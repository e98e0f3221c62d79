#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "petrirl/disruptions.hpp"
#include "petrirl/jssp_env.hpp"

using namespace petrirl;
using Catch::Approx;

namespace {

// Composite Simpson rule; independent of the closed forms under test.
template <typename F>
double simpson(F f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

template <typename Draw>
Moments sample_moments(Draw draw, int n) {
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double x = draw();
    const double d = x - mean;
    mean += d / i;
    m2 += d * (x - mean);
  }
  return {mean, m2 / (n - 1)};
}

JsspInstance small_instance() {
  return JsspInstance::from_ops({{{0, 4}, {1, 6}, {2, 2}}, {{1, 5}, {2, 3}, {0, 7}}, {{2, 4}, {0, 2}, {1, 3}}});
}

}  // namespace

TEST_CASE("Weibull density and hazard") {
  CHECK(weibull_pdf(0.0, 1.0, 1.0) == Approx(1.0));
  for (double t : {0.5, 1.0, 3.0}) CHECK(weibull_pdf(t, 1.0, 1.0) == Approx(std::exp(-t)));

  const double h0 = weibull_hazard(1.0, 1.0, 7.0);
  for (int t = 1; t <= 100; ++t) CHECK(weibull_hazard(t, 1.0, 7.0) == Approx(h0));

  for (int t = 1; t < 100; ++t) {
    CHECK(weibull_hazard(t + 1, 5.0, 30.0) > weibull_hazard(t, 5.0, 30.0));
    CHECK(weibull_hazard(t + 1, 0.5, 30.0) < weibull_hazard(t, 0.5, 30.0));
  }

  const double area = simpson([](double t) { return weibull_pdf(t, 2.5, 10.0); }, 0.0, 200.0, 200000);
  CHECK(area == Approx(1.0).epsilon(1e-8));

  CHECK_THROWS_AS(weibull_pdf(-1.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(weibull_pdf(1.0, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(weibull_hazard(1.0, 1.0, -2.0), DomainError);
}

TEST_CASE("Gamma density") {
  for (double t : {0.0, 0.3, 2.0, 9.0}) CHECK(gamma_pdf(t, 1.0, 4.0) == Approx(std::exp(-t / 4.0) / 4.0));

  const double shape = 3.0;
  const double scale = 2.0;
  const double mean = shape * scale;
  const double area = simpson([&](double t) { return gamma_pdf(t, shape, scale); }, 0.0, 50.0 * mean, 400000);
  CHECK(std::abs(area - 1.0) < 1e-6);

  for (auto [a, b] : {std::pair{3.0, 2.0}, std::pair{5.5, 1.5}, std::pair{10.0, 0.7}}) {
    double best_t = 0.0;
    double best = -1.0;
    for (int i = 1; i <= 200000; ++i) {
      const double t = i * 1e-4;
      const double f = gamma_pdf(t, a, b);
      if (f > best) {
        best = f;
        best_t = t;
      }
    }
    CHECK(best_t == Approx((a - 1.0) * b).margin(2e-4));
  }

  // Large shapes stay finite through the log-Gamma path.
  CHECK(std::isfinite(gamma_pdf(1000.0, 200.0, 5.0)));
  CHECK_THROWS_AS(gamma_pdf(-0.1, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(gamma_pdf(1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("Weibull draws match analytic moments") {
  for (double shape : {0.5, 1.0, 2.0, 5.0}) {
    const double eta = 12.0;
    Rng rng(static_cast<std::uint64_t>(shape * 1000));
    const Moments m = sample_moments([&] { return draw_weibull(shape, eta, rng); }, 1'000'000);
    const double g1 = std::tgamma(1.0 + 1.0 / shape);
    const double g2 = std::tgamma(1.0 + 2.0 / shape);
    CHECK(m.mean == Approx(eta * g1).epsilon(0.02));
    CHECK(m.variance == Approx(eta * eta * (g2 - g1 * g1)).epsilon(0.02));
  }
}

TEST_CASE("Gamma arrival draws match analytic moments") {
  const double s = 0.5;
  const double horizon = 100.0;
  const double shape = 10.0 * s;
  const double scale = 0.1 * horizon;
  Rng rng(99);
  const Moments m = sample_moments([&] { return draw_gamma(shape, scale, rng); }, 1'000'000);
  CHECK(m.mean == Approx(50.0).epsilon(0.02));
  CHECK(m.variance == Approx(shape * scale * scale).epsilon(0.02));
}

TEST_CASE("breakdown sampling") {
  ScenarioConfig cfg;
  cfg.breakdowns_enabled = true;
  Rng a(5);
  Rng b(5);
  const auto first = sample_breakdowns(500, cfg, 4.0, a);
  CHECK(first == sample_breakdowns(500, cfg, 4.0, b));
  CHECK_FALSE(first.empty());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].length() >= 1);
    CHECK(first[i].start < 500);
    if (i > 0) CHECK(first[i].start > first[i - 1].end);
  }

  cfg.breakdowns_enabled = false;
  Rng c(5);
  CHECK(sample_breakdowns(500, cfg, 4.0, c).empty());
  CHECK_THROWS_AS(sample_breakdowns(0, cfg, 4.0, c), DomainError);
}

TEST_CASE("repair draws are at least one step") {
  Rng rng(11);
  for (int i = 0; i < 100000; ++i) CHECK(sample_repair(0.5, 3.0, rng) >= 1);
  CHECK(sample_repair(3.2, 0.0, rng) == 4);
}

TEST_CASE("arrival sampling") {
  ScenarioConfig cfg;
  Rng rng(1);
  const ArrivalDraw off = sample_arrivals(4, 100, cfg, rng);
  CHECK(off.releases == std::vector<Step>{0, 0, 0, 0});

  cfg.arrivals_enabled = true;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng r(seed);
    const ArrivalDraw d = sample_arrivals(6, 80, cfg, r);
    CHECK(std::is_sorted(d.releases.begin(), d.releases.end()));
    CHECK(d.skew >= kMinSkew);
    CHECK(d.skew <= 1.0);
  }

  cfg.skew_min = 0.0;
  cfg.skew_max = 0.0;
  Rng r0(3);
  CHECK(sample_arrivals(3, 50, cfg, r0).skew == kMinSkew);
  CHECK_THROWS_AS(sample_arrivals(0, 50, cfg, r0), DomainError);
  CHECK_THROWS_AS(sample_arrivals(2, 0, cfg, r0), DomainError);
}

TEST_CASE("scenario construction is a pure function of the seed") {
  const JsspInstance inst = small_instance();
  ScenarioConfig cfg;
  cfg.breakdowns_enabled = true;
  cfg.arrivals_enabled = true;
  cfg.seed = 42;
  const ScenarioTrace a = build_scenario(inst, cfg);
  const ScenarioTrace b = build_scenario(inst, cfg);
  CHECK(a == b);
  CHECK(scenario_hash(a) == scenario_hash(b));
  CHECK(a.horizon == JsspEnv::estimate_horizon(inst));

  std::set<std::uint64_t> hashes;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    cfg.seed = seed;
    hashes.insert(scenario_hash(build_scenario(inst, cfg)));
  }
  CHECK(hashes.size() == 100);

  nlohmann::json j = a;
  CHECK(j.get<ScenarioTrace>() == a);
}

TEST_CASE("sub-streams do not depend on instance size") {
  const JsspInstance inst = small_instance();
  JsspInstance bigger = inst;
  bigger.n_machines = 4;
  bigger.n_jobs = 4;
  bigger.ops.push_back({{3, 5}, {0, 1}});
  ScenarioConfig cfg;
  cfg.breakdowns_enabled = true;
  cfg.arrivals_enabled = true;
  cfg.seed = 9;
  const ScenarioTrace a = build_scenario(inst, cfg, 40);
  const ScenarioTrace b = build_scenario(bigger, cfg, 40);
  // Arrival streams depend only on the job index and H.
  for (int j = 0; j < inst.n_jobs; ++j) CHECK(a.releases[j] == b.releases[j]);
  // Breakdown streams depend on the machine index; the mean duration is kept
  // equal so the Weibull scale matches.
  JsspInstance same_mean = inst;
  same_mean.n_machines = 5;
  const ScenarioTrace c = build_scenario(same_mean, cfg, 40);
  for (int m = 0; m < inst.n_machines; ++m) CHECK(a.breakdowns[m] == c.breakdowns[m]);
}

TEST_CASE("trace invariants hold across random configurations") {
  const JsspInstance inst = small_instance();
  Rng meta(2025);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    ScenarioConfig cfg;
    cfg.breakdowns_enabled = u(meta) < 0.8;
    cfg.arrivals_enabled = u(meta) < 0.8;
    cfg.weibull_shape = 0.3 + 5.0 * u(meta);
    cfg.weibull_scale_factor = 0.5 + 6.0 * u(meta);
    cfg.repair_mean = 0.5 + 8.0 * u(meta);
    cfg.repair_std = 4.0 * u(meta);
    const double lo = u(meta);
    cfg.skew_min = lo;
    cfg.skew_max = lo + (1.0 - lo) * u(meta);
    cfg.seed = meta();
    const ScenarioTrace s = build_scenario(inst, cfg, 30);
    CHECK_NOTHROW(s.check(inst));
  }
}

TEST_CASE("configuration validation") {
  ScenarioConfig cfg;
  cfg.weibull_shape = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = {};
  cfg.skew_max = 1.5;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = {};
  cfg.repair_std = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}
