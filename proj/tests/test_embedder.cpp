#include "helpers.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "btrip/embedder.hpp"

using namespace btrip;
using testing::code_of;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

std::filesystem::path temp_path(const char* name) { return std::filesystem::temp_directory_path() / name; }

// Sum of 0.5 * |y|^2 over outputs: d/dy = y.
double half_sq(const Matrix& y) {
  double s = 0.0;
  for (double v : y.data()) s += 0.5 * v * v;
  return s;
}

}  // namespace

TEST_CASE("forward identities") {
  MlpModel zero({3, 4, 2});
  const Matrix e = forward(zero, Matrix(5, 3, 1.0)).embeddings;
  for (double v : e.data()) CHECK(v == 0.0);

  Rng r(1);
  MlpModel lin = init_params({3, 2}, r);
  lin.mutable_layer(0).bias = {0.5, -1.0};
  const Matrix x = random_matrix(4, 3, r);
  const Matrix y = embed(lin, x);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = lin.layer(0).bias[o];
      for (std::size_t k = 0; k < 3; ++k) acc += x(i, k) * lin.layer(0).weight(o, k);
      CHECK(y(i, o) == doctest::Approx(acc).epsilon(1e-14));
    }

  MlpModel m = init_params({3, 8, 2}, r);
  Matrix dup(2, 3);
  for (std::size_t k = 0; k < 3; ++k) dup(0, k) = dup(1, k) = r.normal();
  const Matrix yd = embed(m, dup);
  CHECK(yd(0, 0) == yd(1, 0));
  CHECK(yd(0, 1) == yd(1, 1));
  CHECK(code_of([&] { embed(m, Matrix(2, 4)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("backward identities") {
  Rng r(2);
  MlpModel m = init_params({3, 5, 2}, r);
  const Matrix x = random_matrix(4, 3, r);
  ForwardResult f = forward(m, x);
  const ParamGrads zg = backward(m, f.trace, Matrix(4, 2));
  for (const auto& l : zg.layers) {
    for (double v : l.weight.data()) CHECK(v == 0.0);
    for (double v : l.bias) CHECK(v == 0.0);
  }

  MlpModel lin = init_params({3, 2}, r);
  ForwardResult fl = forward(lin, x);
  const Matrix g = random_matrix(4, 2, r);
  const ParamGrads pg = backward(lin, fl.trace, g);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 4; ++i) acc += g(i, o) * x(i, k);
      CHECK(pg.layers[0].weight(o, k) == doctest::Approx(acc).epsilon(1e-14));
    }
}

TEST_CASE("stale traces are rejected") {
  Rng r(3);
  MlpModel m = init_params({2, 3, 2}, r);
  ForwardResult f = forward(m, random_matrix(2, 2, r));
  const ParamGrads g = backward(m, f.trace, Matrix(2, 2, 1.0));
  sgd_step(m, g, 0.1);
  CHECK(code_of([&] { backward(m, f.trace, Matrix(2, 2, 1.0)); }) == ErrorCode::StaleTrace);
}

TEST_CASE("parameter gradients match finite differences") {
  Rng r(4);
  MlpModel m = init_params({4, 6, 3}, r);
  // keep pre-activations away from the ReLU kink
  for (std::size_t l = 0; l < m.num_layers(); ++l)
    for (double& b : m.mutable_layer(l).bias) b = 0.3 * r.normal();
  const Matrix x = random_matrix(5, 4, r);
  ForwardResult f = forward(m, x);
  const ParamGrads g = backward(m, f.trace, f.embeddings);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::size_t nw = m.layer(l).weight.data().size();
    for (std::size_t k = 0; k < nw + m.layer(l).bias.size(); ++k) {
      auto param = [&](MlpModel& mm) -> double& {
        return k < nw ? mm.mutable_layer(l).weight.data()[k] : mm.mutable_layer(l).bias[k - nw];
      };
      MlpModel plus = m, minus = m;
      param(plus) += h;
      param(minus) -= h;
      const double fd = (half_sq(embed(plus, x)) - half_sq(embed(minus, x))) / (2.0 * h);
      const double an = k < nw ? g.layers[l].weight.data()[k] : g.layers[l].bias[k - nw];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sgd") {
  Rng r(5);
  MlpModel m = init_params({3, 4, 2}, r);
  // grad == params, lr 1 -> zero
  ParamGrads g;
  for (std::size_t l = 0; l < m.num_layers(); ++l) g.layers.push_back(m.layer(l));
  MlpModel z = m;
  sgd_step(z, g, 1.0);
  for (std::size_t l = 0; l < z.num_layers(); ++l) {
    for (double v : z.layer(l).weight.data()) CHECK(v == 0.0);
    for (double v : z.layer(l).bias) CHECK(v == 0.0);
  }
  CHECK(code_of([&] { sgd_step(m, g, 0.0); }) == ErrorCode::DomainError);
  CHECK(code_of([&] { sgd_step(m, g, -1.0); }) == ErrorCode::DomainError);

  // two steps vs one step with summed gradients differ through the nonlinearity
  const Matrix x = random_matrix(6, 3, r);
  MlpModel a = m, b = m;
  ForwardResult fa = forward(a, x);
  const ParamGrads g1 = backward(a, fa.trace, fa.embeddings);
  sgd_step(a, g1, 0.1);
  ForwardResult fa2 = forward(a, x);
  const ParamGrads g2 = backward(a, fa2.trace, fa2.embeddings);
  sgd_step(a, g2, 0.1);
  ParamGrads sum = g1;
  ForwardResult fb2 = forward(m, x);
  const ParamGrads g2b = backward(m, fb2.trace, fb2.embeddings);
  for (std::size_t l = 0; l < sum.layers.size(); ++l) {
    for (std::size_t k = 0; k < sum.layers[l].weight.data().size(); ++k)
      sum.layers[l].weight.data()[k] += g2b.layers[l].weight.data()[k];
    for (std::size_t k = 0; k < sum.layers[l].bias.size(); ++k) sum.layers[l].bias[k] += g2b.layers[l].bias[k];
  }
  sgd_step(b, sum, 0.1);
  CHECK_FALSE(a == b);
}

TEST_CASE("overfit a tiny batch") {
  Rng r(6);
  MlpModel m = init_params({4, 8, 2}, r);
  const Matrix x = random_matrix(6, 4, r);
  const double start = half_sq(embed(m, x));
  double prev = start;
  int increases = 0;
  for (int step = 0; step < 50; ++step) {
    ForwardResult f = forward(m, x);
    const double v = half_sq(f.embeddings);
    if (v > prev) ++increases;
    prev = v;
    sgd_step(m, backward(m, f.trace, f.embeddings), 0.01);
  }
  CHECK(half_sq(embed(m, x)) < 0.5 * start);
  CHECK(increases == 0);
}

TEST_CASE("initialization") {
  Rng a(7), b(7);
  CHECK(init_params({5, 6, 3}, a) == init_params({5, 6, 3}, b));
  Rng r(8);
  const MlpModel m = init_params({50, 200}, r);
  double s2 = 0.0;
  for (double v : m.layer(0).weight.data()) s2 += v * v;
  const double var = s2 / m.layer(0).weight.data().size();
  CHECK(std::abs(var - 2.0 / 50.0) < 0.3 * 2.0 / 50.0);
  for (double v : m.layer(0).bias) CHECK(v == 0.0);
  CHECK(m.num_parameters() == 50 * 200 + 200);
}

TEST_CASE("l2 normalization backward") {
  Rng r(9);
  const Matrix x = random_matrix(3, 4, r);
  const Matrix y = l2_normalize_rows(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(dot(y.row(i), y.row(i)) == doctest::Approx(1.0));
  const Matrix w = random_matrix(3, 4, r);
  const Matrix g = l2_normalize_rows_backward(x, w);
  const double h = 1e-6;
  for (std::size_t k = 0; k < x.data().size(); ++k) {
    Matrix p = x, m = x;
    p.data()[k] += h;
    m.data()[k] -= h;
    const Matrix yp = l2_normalize_rows(p), ym = l2_normalize_rows(m);
    double fd = 0.0;
    for (std::size_t j = 0; j < w.data().size(); ++j) fd += w.data()[j] * (yp.data()[j] - ym.data()[j]) / (2.0 * h);
    CHECK(g.data()[k] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng r(10);
  const MlpModel m = init_params({7, 5, 3}, r);
  const auto path = temp_path("btrip_test_ckpt.bin");
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path) == m);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(bytes.substr(0, 4) == "BTRP");
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  std::string flipped = bytes;
  flipped[40] ^= 0x01;
  write(flipped);
  CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::ChecksumMismatch);
  write(bytes.substr(0, bytes.size() - 20));
  CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::TruncatedFile);
  write("NOPE" + bytes.substr(4));
  CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::BadMagic);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::IoError);
}
