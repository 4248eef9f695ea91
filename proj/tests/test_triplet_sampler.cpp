#include "helpers.hpp"

#include "btrip/triplet_sampler.hpp"

using namespace btrip;
using testing::code_of;

namespace {

struct Fixture {
  Matrix x;
  std::vector<int> y;
  ClassTracker tracker;
};

Fixture make(std::size_t c, std::size_t per_class, std::size_t d, Rng& r, double spread = 1.0) {
  Fixture f{Matrix(c * per_class, d), std::vector<int>(c * per_class), ClassTracker(c, d, CovMode::Standard)};
  for (std::size_t i = 0; i < f.x.rows(); ++i) {
    f.y[i] = static_cast<int>(i / per_class);
    for (std::size_t j = 0; j < d; ++j) f.x(i, j) = 10.0 * f.y[i] * (j == 0) + spread * r.normal();
  }
  f.tracker.observe(f.x, f.y);
  return f;
}

}  // namespace

TEST_CASE("group shape") {
  Rng r(1);
  for (std::size_t c : {2u, 3u, 5u}) {
    Fixture f = make(c, 4, 3, r);
    const TripletBatch b = sample_triplets(f.x, f.y, f.tracker, r);
    CHECK(b.size() == f.x.rows());
    for (std::size_t i = 0; i < b.size(); ++i) {
      const AnchorGroup& g = b.groups[i];
      CHECK(g.positives.size() == c - 1);
      CHECK(g.negatives.size() == c - 1);
      CHECK(g.anchor_label == f.y[i]);
      CHECK(g.anchor == Vector(f.x.row(i).begin(), f.x.row(i).end()));
      for (const auto& v : g.positives) CHECK(v.size() == 3);
    }
  }
}

TEST_CASE("degenerate covariances give the class means") {
  Rng r(2);
  Fixture f = make(3, 5, 2, r, 0.0);
  const TripletBatch b = sample_triplets(f.x, f.y, f.tracker, r, {1e-14});
  for (const AnchorGroup& g : b.groups) {
    for (const auto& p : g.positives) CHECK(p[0] == doctest::Approx(10.0 * g.anchor_label).epsilon(1e-5));
    std::size_t k = 0;
    for (int j = 0; j < 3; ++j) {
      if (j == g.anchor_label) continue;
      CHECK(g.negatives[k++][0] == doctest::Approx(10.0 * j).epsilon(1e-5));
    }
  }
}

TEST_CASE("same seed, same triplets") {
  Rng r(3);
  Fixture f = make(3, 4, 2, r);
  Rng a(99), b(99);
  const TripletBatch ta = sample_triplets(f.x, f.y, f.tracker, a);
  const TripletBatch tb = sample_triplets(f.x, f.y, f.tracker, b);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta.groups[i].positives == tb.groups[i].positives);
    CHECK(ta.groups[i].negatives == tb.groups[i].negatives);
  }
}

TEST_CASE("jitter rescues singular covariances") {
  Rng r(4);
  // one vector per class -> zero covariance
  Fixture f = make(2, 1, 3, r);
  CHECK(code_of([&] { sample_triplets(f.x, f.y, f.tracker, r, {0.0}); }) == ErrorCode::NotPositiveDefinite);
  CHECK_NOTHROW(sample_triplets(f.x, f.y, f.tracker, r));
}

TEST_CASE("sampler preconditions") {
  Rng r(5);
  ClassTracker t(3, 2, CovMode::Standard);
  Matrix x = Matrix::from_rows({{0, 0}, {1, 1}});
  std::vector<int> y{0, 1};
  t.observe(x, y);
  CHECK(code_of([&] { sample_triplets(x, y, t, r); }) == ErrorCode::UninitializedClass);
  Fixture f = make(2, 3, 2, r);
  CHECK(code_of([&] { sample_triplets(Matrix(6, 3), f.y, f.tracker, r); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("sampled moments follow the class model") {
  Rng r(6);
  Fixture f = make(2, 50, 2, r);
  const ClassState& s0 = f.tracker.state(0);
  Vector mean(2, 0.0);
  std::size_t n = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const TripletBatch b = sample_triplets(f.x, f.y, f.tracker, r);
    for (const auto& g : b.groups) {
      const auto& v = g.anchor_label == 0 ? g.positives[0] : g.negatives[0];
      mean[0] += v[0];
      mean[1] += v[1];
      ++n;
    }
  }
  CHECK(mean[0] / n == doctest::Approx(s0.mean0[0]).epsilon(0.02).scale(1.0));
  CHECK(mean[1] / n == doctest::Approx(s0.mean0[1]).epsilon(0.02).scale(1.0));
}
