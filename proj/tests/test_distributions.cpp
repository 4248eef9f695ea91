#include "helpers.hpp"

#include <cmath>
#include <numbers>

using namespace btrip;
using testing::code_of;

namespace {

constexpr double kPi = std::numbers::pi;

double gamma_logpdf(double x, double shape, double scale) {
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double invgamma_logpdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

// Univariate Student-t.
double t_logpdf(double x, double mu, double sigma2, double nu) {
  const double z = (x - mu) * (x - mu) / sigma2;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * kPi * sigma2) -
         0.5 * (nu + 1.0) * std::log1p(z / nu);
}

}  // namespace

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
  CHECK(code_of([&] { r.below(0); }) == ErrorCode::DomainError);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  shuffle(std::span<int>(v), r);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("rng normal moments") {
  Rng r(9);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
}

TEST_CASE("mvn_logpdf examples") {
  const double l2pi = std::log(2.0 * kPi);
  CHECK(mvn_logpdf(Vector{0, 0, 0}, {Vector{0, 0, 0}, SymMatrix::identity(3)}) == doctest::Approx(-1.5 * l2pi));
  CHECK(mvn_logpdf(Vector{0}, {Vector{0}, SymMatrix::identity(1)}) == doctest::Approx(-0.9189385).epsilon(1e-7));
  // product of N(1; 0, 1) and N(2; 0, 4)
  const double oracle = (-0.5 * l2pi - 0.5) + (-0.5 * l2pi - 0.5 * std::log(4.0) - 0.5);
  const double got = mvn_logpdf(Vector{1, 2}, {Vector{0, 0}, SymMatrix::diagonal({1.0, 4.0})});
  CHECK(got == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(got == doctest::Approx(-3.531024).epsilon(1e-6));
  CHECK(code_of([] { mvn_logpdf(Vector{0}, {Vector{0, 0}, SymMatrix::identity(2)}); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("mvn sampler") {
  Rng a(3), b(3);
  CHECK(mvn_sample({Vector{0, 0}, SymMatrix::identity(2)}, a) == mvn_sample({Vector{0, 0}, SymMatrix::identity(2)}, b));

  Rng r(5);
  const Vector tiny = mvn_sample({Vector{1, 2}, regularize_psd(SymMatrix(2), 1e-12)}, r);
  CHECK(tiny[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(tiny[1] == doctest::Approx(2.0).epsilon(1e-4));

  const SymMatrix cov = SymMatrix::from_rows({{2, 0.5}, {0.5, 1}});
  const MvnSampler s(Vector{1, -1}, cov);
  const int n = 50000;
  Vector mean(2, 0.0);
  std::vector<Vector> xs;
  for (int i = 0; i < n; ++i) {
    xs.push_back(s(r));
    mean[0] += xs.back()[0] / n;
    mean[1] += xs.back()[1] / n;
  }
  SymMatrix c(2);
  for (const auto& x : xs) c.add_outer(Vector{x[0] - mean[0], x[1] - mean[1]}, 1.0 / n);
  CHECK(std::abs(mean[0] - 1.0) < 0.05);
  CHECK(std::abs(mean[1] + 1.0) < 0.05);
  CHECK(relative_frobenius_error(c, cov) < 0.1);
}

TEST_CASE("multigamma") {
  CHECK(multigamma_ln(1.0, 1) == doctest::Approx(0.0));
  CHECK(multigamma_ln(4.0, 1) == doctest::Approx(std::log(6.0)));
  CHECK(multigamma_ln(2.0, 2) == doctest::Approx(std::log(kPi / 2.0)).epsilon(1e-13));
  CHECK(multigamma_ln(2.0, 2) == doctest::Approx(0.451583).epsilon(1e-6));
  // recurrence Gamma_d(a) = pi^{(d-1)/2} Gamma(a) Gamma_{d-1}(a - 1/2)
  CHECK(multigamma_ln(3.7, 4) ==
        doctest::Approx(1.5 * std::log(kPi) + std::lgamma(3.7) + multigamma_ln(3.2, 3)).epsilon(1e-13));
  CHECK(code_of([] { multigamma_ln(0.5, 2); }) == ErrorCode::DomainError);
}

TEST_CASE("wishart density") {
  for (double x : {0.3, 1.0, 2.5}) {
    for (double v : {0.5, 2.0}) {
      CHECK(wishart_logpdf(SymMatrix::diagonal({x}), SymMatrix::diagonal({v}), 4.0) ==
            doctest::Approx(gamma_logpdf(x, 2.0, 2.0 * v)).epsilon(1e-12));
    }
  }
  const double oracle = -0.5 - 1.5 * std::log(2.0) - std::log(std::sqrt(kPi) / 2.0);
  CHECK(wishart_logpdf(SymMatrix::identity(1), SymMatrix::identity(1), 3.0) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(oracle == doctest::Approx(-1.418939).epsilon(1e-6));

  Rng r(17);
  for (std::size_t d = 1; d <= 3; ++d) {
    const double lp = wishart_logpdf(testing::random_spd(d, r), testing::random_spd(d, r), d + 2.0);
    CHECK(std::isfinite(lp));
  }
  CHECK(code_of([] { wishart_logpdf(SymMatrix::identity(3), SymMatrix::identity(3), 2.0); }) ==
        ErrorCode::DomainError);
}

TEST_CASE("inverse wishart density") {
  for (double x : {0.2, 1.0, 3.0}) {
    CHECK(invwishart_logpdf(SymMatrix::diagonal({x}), {SymMatrix::diagonal({2.0}), 5.0}) ==
          doctest::Approx(invgamma_logpdf(x, 2.5, 1.0)).epsilon(1e-12));
    // Jacobian of x -> 1/x
    CHECK(invwishart_logpdf(SymMatrix::diagonal({x}), {SymMatrix::diagonal({2.0}), 5.0}) ==
          doctest::Approx(wishart_logpdf(SymMatrix::diagonal({1.0 / x}), SymMatrix::diagonal({0.5}), 5.0) -
                          2.0 * std::log(x))
              .epsilon(1e-12));
  }
  CHECK(code_of([] { invwishart_logpdf(SymMatrix::identity(3), {SymMatrix::identity(3), 2.0}); }) ==
        ErrorCode::DomainError);
}

TEST_CASE("quadrature normalization at d=1") {
  // log-spaced trapezoid over (0.01, 100)
  const int n = 20000;
  const double lo = std::log(0.01), hi = std::log(100.0);
  double iw = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = lo + (hi - lo) * i / n;
    const double x = std::exp(u);
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    iw += w * std::exp(invwishart_logpdf(SymMatrix::diagonal({x}), {SymMatrix::diagonal({2.0}), 5.0})) * x;
  }
  iw *= (hi - lo) / n;
  CHECK(std::abs(iw - 1.0) < 1e-2);

  double g = 0.0;
  const double h = 1e-3;
  for (double x = -10.0; x <= 10.0; x += h) g += std::exp(mvn_logpdf(Vector{x}, {Vector{0.5}, SymMatrix::diagonal({1.7})}));
  CHECK(std::abs(g * h - 1.0) < 1e-2);
}

TEST_CASE("inverse wishart mean") {
  const SymMatrix m = invwishart_mean({SymMatrix::identity(3), 7.0});
  CHECK(m(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(m(0, 1) == 0.0);
  const SymMatrix m2 = invwishart_mean({SymMatrix::diagonal({6.0, 3.0}), 5.0});
  CHECK(m2(0, 0) == doctest::Approx(3.0));
  CHECK(m2(1, 1) == doctest::Approx(1.5));
  CHECK(code_of([] { invwishart_mean({SymMatrix::identity(2), 3.0}); }) == ErrorCode::DomainError);
}

TEST_CASE("multivariate t") {
  for (double x : {-2.0, 0.0, 0.7, 4.0}) {
    CHECK(mvt_logpdf(Vector{x}, {Vector{0.0}, SymMatrix::identity(1), 3.0}) ==
          doctest::Approx(t_logpdf(x, 0.0, 1.0, 3.0)).epsilon(1e-13));
    CHECK(mvt_logpdf(Vector{x}, {Vector{0.5}, SymMatrix::diagonal({2.5}), 6.0}) ==
          doctest::Approx(t_logpdf(x, 0.5, 2.5, 6.0)).epsilon(1e-13));
  }
  Rng r(21);
  const MvtParams p{Vector{1, -2, 0.5}, testing::random_spd(3, r), 5.0};
  const double at_mode = mvt_logpdf(p.mean, p);
  for (int i = 0; i < 100; ++i) {
    Vector x = testing::random_vector(3, r);
    CHECK(mvt_logpdf(x, p) <= at_mode);
  }
  // normalizes at d=1 with a heavy tail
  double s = 0.0;
  const double h = 1e-2;
  for (double x = -2000.0; x <= 2000.0; x += h) s += std::exp(mvt_logpdf(Vector{x}, {Vector{0.0}, SymMatrix::identity(1), 3.0}));
  CHECK(std::abs(s * h - 1.0) < 1e-3);

  // sample mean of a reference generator: mu + z / sqrt(chi2 / nu)
  const double nu = 8.0;
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double chi = 0.0;
    for (int k = 0; k < 8; ++k) {
      const double z = r.normal();
      chi += z * z;
    }
    mean += (1.5 + r.normal() / std::sqrt(chi / nu)) / n;
  }
  CHECK(std::abs(mean - 1.5) < 0.02);
}

TEST_CASE("normal inverse wishart factorization") {
  Rng r(31);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + t % 3;
    const NiwParams p{testing::random_vector(d, r), 0.5 + 3.0 * r.uniform(), testing::random_spd(d, r),
                      static_cast<double>(d) + 1.0 + 4.0 * r.uniform()};
    const SymMatrix sigma = testing::random_spd(d, r);
    const Vector mu = testing::random_vector(d, r);
    const double lhs = niw_logpdf(mu, sigma, p);
    const double rhs = invwishart_logpdf(sigma, {p.scale, p.dof}) + mvn_logpdf(mu, {p.mean, sigma * (1.0 / p.kappa)});
    CHECK(std::isfinite(lhs));
    CHECK(std::abs(lhs - rhs) < 1e-9);
  }
}

TEST_CASE("normal inverse wishart integrates to one at d=1") {
  const NiwParams p{Vector{0.3}, 2.0, SymMatrix::diagonal({1.5}), 4.0};
  const int ns = 1500, nm = 1500;
  const double lo = std::log(0.005), hi = std::log(200.0);
  const double mlo = -12.0, mhi = 12.0;
  double total = 0.0;
  for (int i = 0; i <= ns; ++i) {
    const double s = std::exp(lo + (hi - lo) * i / ns);
    const double ws = (i == 0 || i == ns) ? 0.5 : 1.0;
    for (int j = 0; j <= nm; ++j) {
      const double m = mlo + (mhi - mlo) * j / nm;
      const double wm = (j == 0 || j == nm) ? 0.5 : 1.0;
      total += ws * wm * s * std::exp(niw_logpdf(Vector{m}, SymMatrix::diagonal({s}), p));
    }
  }
  total *= (hi - lo) / ns * (mhi - mlo) / nm;
  CHECK(std::abs(total - 1.0) < 2e-2);
}
