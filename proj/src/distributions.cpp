#include "btrip/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "btrip/error.hpp"

namespace btrip {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kLnPi = 1.1447298858494002;  // ln(pi)
constexpr double kLn2Pi = kLn2 + kLnPi;

void require_square_dim(const SymMatrix& m, std::size_t d, const char* what) {
  require_dims(m.dim(), d, what);
}

}  // namespace

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  return u * f;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) fail(ErrorCode::DomainError, "Rng::below: bound must be positive");
  // Lemire's multiply-and-reject.
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

Rng Rng::split() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ULL); }

double mvn_logpdf(std::span<const double> x, const GaussianParams& p) {
  const std::size_t d = p.mean.size();
  require_dims(x.size(), d, "mvn_logpdf x");
  require_square_dim(p.cov, d, "mvn_logpdf cov");
  const CholFactor f = cholesky(p.cov);
  Vector diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - p.mean[i];
  return -0.5 * (static_cast<double>(d) * kLn2Pi + spd_logdet(f) + spd_quadratic_form(f, diff));
}

MvnSampler::MvnSampler(Vector mean, const SymMatrix& cov) : mean_(std::move(mean)), factor_(cholesky(cov)) {
  require_dims(cov.dim(), mean_.size(), "MvnSampler cov");
}

Vector MvnSampler::operator()(Rng& rng) const {
  Vector z(mean_.size());
  for (double& zi : z) zi = rng.normal();
  Vector out = factor_.lower_multiply(z);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += mean_[i];
  return out;
}

Vector mvn_sample(const GaussianParams& p, Rng& rng) { return MvnSampler(p.mean, p.cov)(rng); }

double multigamma_ln(double a, std::size_t d) {
  if (d == 0) fail(ErrorCode::DomainError, "multigamma_ln: d must be >= 1");
  if (!(a > 0.5 * static_cast<double>(d - 1))) {
    fail(ErrorCode::DomainError, "multigamma_ln: a must exceed (d - 1) / 2");
  }
  // Gamma_d(a) = pi^{(d-1)/2} Gamma(a) Gamma_{d-1}(a - 1/2), unrolled.
  double s = 0.0;
  for (std::size_t k = d; k >= 2; --k) {
    s += 0.5 * static_cast<double>(k - 1) * kLnPi;
    s += std::lgamma(a - 0.5 * static_cast<double>(d - k));
  }
  return s + std::lgamma(a - 0.5 * static_cast<double>(d - 1));
}

double wishart_logpdf(const SymMatrix& x, const SymMatrix& v, double nu) {
  const std::size_t d = x.dim();
  require_square_dim(v, d, "wishart_logpdf scale");
  const double dd = static_cast<double>(d);
  if (!(nu >= dd)) fail(ErrorCode::DomainError, "wishart_logpdf: nu must be >= d");
  const CholFactor fx = cholesky(x);
  const CholFactor fv = cholesky(v);
  return 0.5 * (nu - dd - 1.0) * spd_logdet(fx) - 0.5 * spd_trace_solve(fv, x) -
         0.5 * nu * dd * kLn2 - 0.5 * nu * spd_logdet(fv) - multigamma_ln(0.5 * nu, d);
}

double invwishart_logpdf(const SymMatrix& x, const InvWishartParams& p) {
  const std::size_t d = x.dim();
  require_square_dim(p.scale, d, "invwishart_logpdf scale");
  const double dd = static_cast<double>(d);
  if (!(p.dof > dd - 1.0)) fail(ErrorCode::DomainError, "invwishart_logpdf: nu must exceed d - 1");
  const CholFactor fx = cholesky(x);
  const CholFactor fpsi = cholesky(p.scale);
  // tr(Psi x^{-1}) == tr(x^{-1} Psi)
  return 0.5 * p.dof * spd_logdet(fpsi) - 0.5 * p.dof * dd * kLn2 - multigamma_ln(0.5 * p.dof, d) -
         0.5 * (p.dof + dd + 1.0) * spd_logdet(fx) - 0.5 * spd_trace_solve(fx, p.scale);
}

SymMatrix invwishart_mean(const InvWishartParams& p) {
  const double dd = static_cast<double>(p.scale.dim());
  if (!(p.dof > dd + 1.0)) {
    fail(ErrorCode::DomainError, "invwishart_mean: requires nu > d + 1, got nu = " + std::to_string(p.dof));
  }
  return p.scale * (1.0 / (p.dof - dd - 1.0));
}

double mvt_logpdf(std::span<const double> x, const MvtParams& p) {
  const std::size_t d = p.mean.size();
  require_dims(x.size(), d, "mvt_logpdf x");
  require_square_dim(p.shape, d, "mvt_logpdf shape");
  if (!(p.dof > 0.0)) fail(ErrorCode::DomainError, "mvt_logpdf: dof must be positive");
  const double dd = static_cast<double>(d);
  const CholFactor f = cholesky(p.shape);
  Vector diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - p.mean[i];
  const double q = spd_quadratic_form(f, diff);
  return std::lgamma(0.5 * (p.dof + dd)) - std::lgamma(0.5 * p.dof) - 0.5 * dd * (std::log(p.dof) + kLnPi) -
         0.5 * spd_logdet(f) - 0.5 * (p.dof + dd) * std::log1p(q / p.dof);
}

double niw_logpdf(std::span<const double> mu, const SymMatrix& sigma, const NiwParams& p) {
  const std::size_t d = p.mean.size();
  require_dims(mu.size(), d, "niw_logpdf mu");
  require_square_dim(sigma, d, "niw_logpdf sigma");
  require_square_dim(p.scale, d, "niw_logpdf scale");
  const double dd = static_cast<double>(d);
  if (!(p.kappa > 0.0)) fail(ErrorCode::DomainError, "niw_logpdf: kappa must be positive");
  if (!(p.dof > dd - 1.0)) fail(ErrorCode::DomainError, "niw_logpdf: dof must exceed d - 1");
  const CholFactor fs = cholesky(sigma);
  const CholFactor fscale = cholesky(p.scale);
  Vector diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = mu[i] - p.mean[i];

  const double log_norm = 0.5 * p.dof * spd_logdet(fscale) - 0.5 * p.dof * dd * kLn2 -
                          multigamma_ln(0.5 * p.dof, d) - 0.5 * dd * (kLn2Pi - std::log(p.kappa));
  const double log_sigma_power = -(0.5 * (p.dof + dd) + 1.0) * spd_logdet(fs);
  const double exponent = -0.5 * spd_trace_solve(fs, p.scale) - 0.5 * p.kappa * spd_quadratic_form(fs, diff);
  return log_norm + log_sigma_power + exponent;
}

}  // namespace btrip
