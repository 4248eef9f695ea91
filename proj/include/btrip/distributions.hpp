#pragma once

// Log-densities, moments and the Gaussian sampler behind the class models.
// Everything is in log space; raw densities underflow at realistic d.

#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include "btrip/matrix.hpp"

namespace btrip {

/// Seeded generator. Built on mt19937_64 (whose output sequence is fixed by
/// the standard) with hand-rolled uniform/normal/index transforms, so streams
/// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Independent child stream derived from this one.
  Rng split();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

struct GaussianParams {
  Vector mean;
  SymMatrix cov;
};

struct InvWishartParams {
  SymMatrix scale;  // Psi
  double dof = 0.0;
};

struct MvtParams {
  Vector mean;
  SymMatrix shape;
  double dof = 0.0;
};

struct NiwParams {
  Vector mean;        // location of mu
  double kappa = 0.0; // pseudo-count scaling the conditional covariance of mu
  SymMatrix scale;    // inverse-Wishart scale on Sigma
  double dof = 0.0;
};

double mvn_logpdf(std::span<const double> x, const GaussianParams& p);

/// mean + L z, L = cholesky(cov). Throws NotPositiveDefinite when cov does not
/// factor; callers regularize first.
Vector mvn_sample(const GaussianParams& p, Rng& rng);

/// Pre-factored sampler for repeated draws from one Gaussian.
class MvnSampler {
 public:
  MvnSampler(Vector mean, const SymMatrix& cov);
  std::size_t dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  Vector operator()(Rng& rng) const;

 private:
  Vector mean_;
  CholFactor factor_;
};

/// ln Gamma_d(a), requires a > (d - 1) / 2.
double multigamma_ln(double a, std::size_t d);

/// Wishart W_d(V, nu) log-density at SPD x; requires nu >= d.
double wishart_logpdf(const SymMatrix& x, const SymMatrix& v, double nu);

/// Inverse-Wishart log-density; requires nu > d - 1.
double invwishart_logpdf(const SymMatrix& x, const InvWishartParams& p);

/// E[X] = Psi / (nu - d - 1), defined for nu > d + 1.
SymMatrix invwishart_mean(const InvWishartParams& p);

/// Multivariate Student-t with the normalized exponent -(nu + d) / 2.
double mvt_logpdf(std::span<const double> x, const MvtParams& p);

/// Normal-inverse-Wishart joint log-density of (mu, sigma).
double niw_logpdf(std::span<const double> mu, const SymMatrix& sigma, const NiwParams& p);

}  // namespace btrip
