#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nexus/metrics.hpp"
#include "nexus/report.hpp"

using namespace nexus;

namespace {

double loop_mape(const std::vector<double>& a, const std::vector<double>& p) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - p[i]) / std::fabs(a[i]);
  return s / a.size();
}

double loop_rmse(const std::vector<double>& a, const std::vector<double>& p) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - p[i]) * (a[i] - p[i]);
  return std::sqrt(s / a.size());
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("mape examples") {
  CHECK(mape(std::vector<double>{100, 200}, std::vector<double>{100, 200}) == 0.0);
  CHECK(mape(std::vector<double>{100, 200}, std::vector<double>{110, 180}) == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(mape(std::vector<double>{50}, std::vector<double>{0}) == 1.0);
}

TEST_CASE("rmse examples") {
  CHECK(rmse(std::vector<double>{3, 7, 9}, std::vector<double>{3, 7, 9}) == 0.0);
  CHECK(std::fabs(rmse(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}) - std::sqrt(2.0 / 3.0)) < 1e-9);
  CHECK(rmse(std::vector<double>{0}, std::vector<double>{5}) == 5.0);
}

TEST_CASE("metric errors") {
  CHECK(kind_of([] { mape(std::vector<double>{1, 2}, std::vector<double>{1}); }) == ErrorKind::LengthMismatch);
  CHECK(kind_of([] { mape(std::vector<double>{}, std::vector<double>{}); }) == ErrorKind::LengthMismatch);
  CHECK(kind_of([] { rmse(std::vector<double>{1}, std::vector<double>{}); }) == ErrorKind::LengthMismatch);
  CHECK(kind_of([] { mape(std::vector<double>{1, 1e-10}, std::vector<double>{1, 1}); }) == ErrorKind::NearZeroActual);
  CHECK(kind_of([] { relative_improvement(0.0, 1.0); }) == ErrorKind::NonPositiveBaseline);
}

TEST_CASE("metrics accept Eigen expressions") {
  Eigen::VectorXd a(3), p(3);
  a << 10, 20, 40;
  p << 11, 18, 40;
  CHECK(mape(a, p) == doctest::Approx((0.1 + 0.1 + 0.0) / 3));
  CHECK(rmse(a.head(2), p.head(2)) == doctest::Approx(std::sqrt((1.0 + 4.0) / 2)));
}

TEST_CASE("metric properties on random vectors") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(1.0, 500.0), scale(-10.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 40);
    std::vector<double> a(n), p(n);
    for (int i = 0; i < n; ++i) a[i] = v(rng), p[i] = v(rng);
    CHECK(std::fabs(mape(a, p) - loop_mape(a, p)) < 1e-12);
    CHECK(std::fabs(rmse(a, p) - loop_rmse(a, p)) < 1e-12);
    CHECK(mape(a, a) == 0.0);
    CHECK(rmse(a, a) == 0.0);

    double c = scale(rng);
    if (std::fabs(c) < 1e-3) c = 2.0;
    std::vector<double> ca(a), cp(p);
    for (int i = 0; i < n; ++i) ca[i] *= c, cp[i] *= c;
    CHECK(mape(ca, cp) == doctest::Approx(mape(a, p)).epsilon(1e-10));
    CHECK(rmse(ca, cp) == doctest::Approx(std::fabs(c) * rmse(a, p)).epsilon(1e-10));

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pa(n), pp(n);
    for (int i = 0; i < n; ++i) pa[i] = a[perm[i]], pp[i] = p[perm[i]];
    CHECK(mape(pa, pp) == doctest::Approx(mape(a, p)).epsilon(1e-12));
    CHECK(rmse(pa, pp) == doctest::Approx(rmse(a, p)).epsilon(1e-12));
  }
}

TEST_CASE("relative improvement") {
  CHECK(format_improvement(relative_improvement(0.0423, 0.0361)) == "↓14.7%");
  CHECK(format_improvement(relative_improvement(63.1264, 53.4620)) == "↓15.3%");
  CHECK(relative_improvement(0.5, 0.5) == 0.0);
  CHECK(relative_improvement(3.0, 0.0) == 1.0);
  CHECK(relative_improvement(1.0, 1.5) < 0.0);
  CHECK(format_improvement(-0.03) == "↑3.0%");
  CHECK(format_metric(0.03614) == "0.0361");
}

TEST_CASE("aggregate pools pairs and weights averages") {
  // Two tasks with per-task MAPE 0.02 and 0.04 pool to 0.03.
  std::vector<ScoredForecast> r{
      {"d", "multimodal", "nexus", 4, {100, 100}, {102, 98}},
      {"d", "multimodal", "nexus", 4, {100, 100}, {104, 96}},
  };
  auto rep = aggregate(r);
  const auto* cell = rep.find({"d", "multimodal", "nexus", 4});
  REQUIRE(cell);
  CHECK(cell->mape == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(cell->sample_count == 2);
  CHECK(rep.find({"d", "multimodal", "nexus", std::nullopt})->mape == doctest::Approx(0.03));

  CHECK(kind_of([] { aggregate({}); }) == ErrorKind::EmptyInput);

  std::vector<ScoredForecast> perfect{{"d", "s", "m", 1, {5}, {5}}};
  auto p = aggregate(perfect);
  CHECK(p.find({"d", "s", "m", 1})->mape == 0.0);
  CHECK(p.find({"d", "s", "m", 1})->rmse == 0.0);
}

TEST_CASE("weighted and unweighted average rows") {
  // Per-horizon MAPEs 0.0306 / 0.0369 / 0.0407 with 510 / 450 / 375 tasks.
  const double mapes[] = {0.0306, 0.0369, 0.0407};
  const int counts[] = {510, 450, 375};
  const int hs[] = {4, 8, 13};
  std::vector<ScoredForecast> r;
  for (int k = 0; k < 3; ++k) {
    for (int t = 0; t < counts[k]; ++t) r.push_back({"z", "m", "nexus", hs[k], {100.0}, {100.0 * (1 + mapes[k])}});
  }
  const double weighted = (0.0306 * 510 + 0.0369 * 450 + 0.0407 * 375) / 1335.0;
  const double plain = (0.0306 + 0.0369 + 0.0407) / 3.0;
  auto w = aggregate(r, AverageMode::SampleWeighted);
  auto u = aggregate(r, AverageMode::Unweighted);
  CHECK(w.find({"z", "m", "nexus", std::nullopt})->mape == doctest::Approx(weighted).epsilon(1e-9));
  CHECK(u.find({"z", "m", "nexus", std::nullopt})->mape == doctest::Approx(plain).epsilon(1e-9));
  CHECK(format_metric(w.find({"z", "m", "nexus", std::nullopt})->mape) == "0.0356");
  CHECK(w.find({"z", "m", "nexus", std::nullopt})->sample_count == 1335);
}

TEST_CASE("markdown report carries improvement subscripts") {
  std::vector<ScoredForecast> r{
      {"zillow", "multimodal", "cot", 4, {1.0}, {1.0423}},
      {"zillow", "multimodal", "nexus", 4, {1.0}, {1.0361}},
  };
  const auto md = to_markdown(aggregate(r));
  CHECK(md.find("0.0361 (↓14.7%)") != std::string::npos);
  CHECK(md.find("### Setting: multimodal") != std::string::npos);
  const auto j = to_json(aggregate(r));
  CHECK(j["rows"].size() == 4);
}
