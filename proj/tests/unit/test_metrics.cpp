#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distillnn/errors.hpp"
#include "distillnn/metrics.hpp"
#include "support.hpp"

using namespace distillnn;

namespace {

PredictiveSampleSet scalar_samples(std::vector<double> mu, std::vector<double> var = {}) {
  const std::size_t t = mu.size();
  PredictiveSampleSet s{Tensor::matrix(t, 1, std::move(mu)), {}};
  if (!var.empty()) {
    for (double& v : var) v = std::log(v);
    s.logvar = Tensor::matrix(t, 1, std::move(var));
  }
  return s;
}

// Exact AUSE for integer errors. The curve at fraction j/100 is the mean of the
// errors left after dropping the ceil(jN/100) most uncertain items (stable ties)
// divided by the full mean; every value is a multiple of 1/(840 * S0) for N <= 8.
double exact_ause(const std::vector<long>& errors, const std::vector<double>& unc) {
  const long n = static_cast<long>(errors.size());
  auto ranked = [&](auto key) {
    std::vector<long> idx(errors.size());
    std::iota(idx.begin(), idx.end(), 0L);
    std::stable_sort(idx.begin(), idx.end(), [&](long a, long b) { return key(a) > key(b); });
    return idx;
  };
  const auto by_unc = ranked([&](long i) { return unc[i]; });
  const auto by_err = ranked([&](long i) { return static_cast<double>(errors[i]); });
  const long s0 = std::accumulate(errors.begin(), errors.end(), 0L);
  // scaled(j) = 840 * S0 * (model - oracle) at fraction j, an integer.
  auto scaled = [&](long j) {
    const long removed = (j * n + 99) / 100;
    const long left = n - removed;
    if (left == 0) return 0L;
    long sm = 0, so = 0;
    for (long i = removed; i < n; ++i) {
      sm += errors[by_unc[i]];
      so += errors[by_err[i]];
    }
    return (sm - so) * n * (840 / left);
  };
  long total = 0;
  for (long j = 1; j <= 100; ++j) total += scaled(j - 1) + scaled(j);
  return static_cast<double>(total) / (200.0 * 840.0 * static_cast<double>(s0));
}

}  // namespace

TEST_CASE("epistemic variance") {
  CHECK(epistemic_variance(scalar_samples({2, 2, 2}))[0] == 0.0);
  CHECK(epistemic_variance(scalar_samples({1, 3}))[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const std::size_t t = 2 + rng.index(60), d = 1 + rng.index(4);
    const Tensor mu = testing::random_matrix(t, d, rng, 2.0);
    const std::vector<double> v = epistemic_variance({mu, {}});
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t s = 0; s < t; ++s) mean += mu(s, j) / static_cast<double>(t);
      double var = 0.0;
      for (std::size_t s = 0; s < t; ++s) var += (mu(s, j) - mean) * (mu(s, j) - mean) / static_cast<double>(t);
      CHECK(std::abs(v[j] - var) < 1e-12);
    }
  }
}

TEST_CASE("total variance") {
  CHECK(total_variance(scalar_samples({1, 3}, {0.5, 1.5}))[0] == doctest::Approx(2.0).epsilon(1e-15));
  const PredictiveSampleSet same = scalar_samples({0.7, 0.7, 0.7}, {0.2, 0.4, 0.9});
  CHECK(total_variance(same)[0] == doctest::Approx(0.5).epsilon(1e-14));
  const PredictiveSampleSet quiet = scalar_samples({0.1, 0.5, 2.0}, {1e-300, 1e-300, 1e-300});
  CHECK(total_variance(quiet)[0] == doctest::Approx(epistemic_variance(quiet)[0]).epsilon(1e-14));
  CHECK_THROWS_AS(total_variance(scalar_samples({1, 2})), ContractError);
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(static_cast<std::uint64_t>(100 + seed));
    const std::size_t t = 2 + rng.index(30);
    std::vector<double> mu(t), var(t);
    for (std::size_t s = 0; s < t; ++s) mu[s] = rng.normal(), var[s] = 0.1 + rng.uniform();
    double m = 0.0, a = 0.0;
    for (std::size_t s = 0; s < t; ++s) m += mu[s] / static_cast<double>(t), a += var[s] / static_cast<double>(t);
    double ev = 0.0;
    for (double x : mu) ev += (x - m) * (x - m) / static_cast<double>(t);
    CHECK(std::abs(total_variance(scalar_samples(mu, var))[0] - (ev + a)) < 1e-12);
  }
}

TEST_CASE("bald") {
  CHECK(bald(Tensor::matrix(3, 2, {0.3, 0.7, 0.3, 0.7, 0.3, 0.7})) == doctest::Approx(0.0).epsilon(1e-15));
  const double expected = -(0.7 * std::log(0.7) + 0.3 * std::log(0.3)) -
                          0.5 * (-(0.9 * std::log(0.9) + 0.1 * std::log(0.1)) + std::log(2.0));
  const double b = bald(Tensor::matrix(2, 2, {0.9, 0.1, 0.5, 0.5}));
  CHECK(std::abs(b - expected) < 1e-12);
  CHECK(b == doctest::Approx(0.10175).epsilon(1e-4));
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(static_cast<std::uint64_t>(200 + seed));
    const std::size_t t = 1 + rng.index(20), k = 2 + rng.index(5);
    const Tensor p = softmax_rows(testing::random_matrix(t, k, rng, 2.0));
    // Oracle via the mutual-information form: mean KL(p_t || p_bar).
    std::vector<double> bar(k, 0.0);
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t j = 0; j < k; ++j) bar[j] += p(s, j) / static_cast<double>(t);
    double mi = 0.0;
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t j = 0; j < k; ++j) mi += p(s, j) * std::log(p(s, j) / bar[j]) / static_cast<double>(t);
    CHECK(std::abs(bald(p) - mi) < 1e-10);
    CHECK(bald(p) <= entropy(bar) + 1e-15);
  }
}

TEST_CASE("ause") {
  SUBCASE("perfect ranking") {
    const std::vector<double> e = {0.1, 0.5, 0.2, 0.9};
    CHECK(ause(e, e).value == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("reversed ranking of four") {
    const std::vector<double> e = {1, 2, 3, 4}, u = {4, 3, 2, 1};
    const double want = exact_ause({1, 2, 3, 4}, u);
    CHECK(want > 0.0);
    CHECK(std::abs(ause(e, u).value - want) < 1e-12);
  }
  SUBCASE("ties everywhere") {
    const std::vector<double> e = {1, 2, 3, 4}, u = {1, 1, 1, 1};
    CHECK(ause(e, u).value > 0.0);
    CHECK(std::abs(ause(e, u).value - exact_ause({1, 2, 3, 4}, u)) < 1e-12);
  }
  SUBCASE("all orderings up to six items and random ones up to eight") {
    Rng rng(31);
    for (std::size_t n = 2; n <= 8; ++n) {
      std::vector<long> err(n);
      for (long& e : err) e = static_cast<long>(rng.index(9));
      err[0] += 1;  // keep the base mean positive
      const std::vector<double> err_d(err.begin(), err.end());
      std::vector<double> unc(n);
      std::iota(unc.begin(), unc.end(), 0.0);
      std::size_t tried = 0;
      do {
        CAPTURE(n);
        CHECK(std::abs(ause(err_d, unc).value - exact_ause(err, unc)) < 1e-12);
        ++tried;
        if (n > 6) shuffle(unc, rng);
      } while ((n <= 6 ? std::next_permutation(unc.begin(), unc.end()) : tried < 300));
    }
  }
  SUBCASE("zero errors are degenerate") {
    const std::vector<double> z = {0, 0, 0};
    const AuseResult r = ause(z, z);
    CHECK(r.degenerate);
    CHECK(r.value == 0.0);
    CHECK(r.curve.fractions.size() == 101);
  }
}

TEST_CASE("classification ece") {
  CHECK(ece_classification(std::vector<double>{1.0}, {true}) == 0.0);
  CHECK(ece_classification(std::vector<double>{1.0, 1.0}, {true, false}) == doctest::Approx(0.5));
  // Two bins, each calibrated.
  const std::vector<double> c = {0.75, 0.75, 0.75, 0.75, 0.25, 0.25, 0.25, 0.25};
  CHECK(ece_classification(c, {true, true, true, false, true, false, false, false}) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(reliability_diagram(c, std::vector<bool>(8, true)).bins.size() == 10);
}

TEST_CASE("regression ece") {
  // Evenly spread CDF values cover every level exactly.
  std::vector<double> mids;
  for (int j = 0; j < 3000; ++j) mids.push_back((j + 0.5) / 3000.0);
  CHECK(ece_regression(mids) == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> zeros(50, 0.0);
  CHECK(ece_regression(zeros) == doctest::Approx(std::sqrt(8555.0 / 27000.0)).epsilon(1e-14));
  CHECK(ece_regression(zeros) == doctest::Approx(0.562896).epsilon(1e-6));

  Rng rng(77);
  std::vector<double> u(100000);
  for (double& x : u) x = rng.uniform();
  CHECK(ece_regression(u) < 0.02);
  CHECK(laplace_cdf(0.3, 0.3, 0.7) == doctest::Approx(0.5));
  const std::vector<double> s = {1, 2, 3, 4};
  CHECK(empirical_cdf(s, 2.5) == 0.5);
}

TEST_CASE("js distance") {
  Rng rng(4);
  std::vector<double> a(500), b(500);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal() + 0.8;
  CHECK(js_distance(a, a) == 0.0);
  CHECK(js_distance(a, b) == doctest::Approx(js_distance(b, a)).epsilon(1e-14));
  CHECK(js_distance(a, b) > 0.1);
  const std::vector<double> lo(20, 0.0), hi(20, 1.0);
  CHECK(js_distance(lo, hi) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(js_distance(std::vector<double>{}, hi), ContractError);
}

TEST_CASE("predictive metrics") {
  const std::vector<double> y = {1.0, 2.0, 4.0};
  const RegressionMetrics perfect = regression_metrics(y, y);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.rel == 0.0);
  CHECK(perfect.delta1 == 1.0);
  const std::vector<double> scaled = {1.25, 2.5, 5.0};
  const RegressionMetrics edge = regression_metrics(scaled, y);
  CHECK(edge.delta1 == 0.0);
  CHECK(edge.delta2 == 1.0);
  const std::vector<double> neg = {-1.0, 2.0};
  CHECK(regression_metrics(neg, std::vector<double>{1.0, 2.0}).excluded == 1);

  const std::vector<int> labels = {0, 1, 1};
  const ClassificationMetrics c = classification_metrics(Tensor::matrix(3, 2, {1, 0, 0, 1, 0, 1}), labels);
  CHECK(c.accuracy == 1.0);
  CHECK(c.mean_iou == 1.0);
  CHECK(c.brier == 0.0);
  CHECK(brier_score(std::vector<double>{1.0, 0.0}, 1) == doctest::Approx(1.0));
}
