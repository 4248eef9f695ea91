#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "btrip/btrip.h"

namespace {

std::string tmp(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

std::string dump(const btrip_config* cfg) {
  size_t n = 0;
  REQUIRE(btrip_config_dump(cfg, nullptr, 0, &n) == BTRIP_OK);
  std::string s(n, '\0');
  REQUIRE(btrip_config_dump(cfg, s.data(), s.size(), &n) == BTRIP_OK);
  s.resize(n - 1);
  return s;
}

}  // namespace

TEST_CASE("config handles") {
  btrip_config* cfg = nullptr;
  REQUIRE(btrip_config_create(&cfg) == BTRIP_OK);
  CHECK(btrip_config_set(cfg, "margin", "0.5") == BTRIP_OK);
  CHECK(dump(cfg).find("margin=0.5\n") != std::string::npos);
  CHECK(btrip_config_set(cfg, "nope", "1") == BTRIP_E_CONFIG);
  CHECK(std::string(btrip_last_error()).find("nope") != std::string::npos);
  CHECK(btrip_config_set(cfg, nullptr, "1") == BTRIP_E_ARGUMENT);
  CHECK(btrip_config_set(cfg, "lr", "0") == BTRIP_OK);
  CHECK(btrip_config_validate(cfg) == BTRIP_E_CONFIG);

  char small[4];
  size_t need = 0;
  CHECK(btrip_config_get(cfg, "dataset", small, sizeof small, &need) == BTRIP_E_ARGUMENT);
  CHECK(need == 6);
  char buf[16];
  CHECK(btrip_config_get(cfg, "dataset", buf, sizeof buf, &need) == BTRIP_OK);
  CHECK(std::string(buf) == "blobs");
  btrip_config_destroy(cfg);
  btrip_config_destroy(nullptr);
  CHECK(btrip_config_create(nullptr) == BTRIP_E_ARGUMENT);
}

TEST_CASE("train, save, reload and evaluate") {
  btrip_config* cfg = nullptr;
  REQUIRE(btrip_config_create(&cfg) == BTRIP_OK);
  btrip_config_set(cfg, "embed_dim", "2");
  btrip_config_set(cfg, "max_epochs", "3");
  btrip_config_set(cfg, "blobs_per_class", "40");
  const std::string ckpt = tmp("btrip_capi.btrp");
  btrip_config_set(cfg, "checkpoint", ckpt.c_str());

  btrip_data* data = nullptr;
  REQUIRE(btrip_data_load(cfg, &data) == BTRIP_OK);
  size_t count = 0, q = 0, c = 0;
  REQUIRE(btrip_data_split_info(data, "train", &count, &q, &c) == BTRIP_OK);
  CHECK(q == 10);
  CHECK(c == 3);
  CHECK(btrip_data_split_info(data, "bogus", &count, &q, &c) == BTRIP_E_CONFIG);

  int epochs_seen = 0;
  auto cb = [](size_t, double, const double*, void* user) { ++*static_cast<int*>(user); };
  btrip_run* run = nullptr;
  REQUIRE(btrip_train(cfg, data, cb, &epochs_seen, &run) == BTRIP_OK);
  size_t best_epoch = 0, epochs = 0;
  int early = 0;
  double best[4], base[4];
  REQUIRE(btrip_run_summary(run, &best_epoch, &epochs, &early, best, base) == BTRIP_OK);
  CHECK(static_cast<size_t>(epochs_seen) == epochs);
  REQUIRE(btrip_run_write_outputs(run) == BTRIP_OK);

  btrip_model* model = nullptr;
  REQUIRE(btrip_model_load(ckpt.c_str(), &model) == BTRIP_OK);
  size_t ndims = 0;
  REQUIRE(btrip_model_dims(model, nullptr, 0, &ndims) == BTRIP_OK);
  std::vector<size_t> dims(ndims);
  REQUIRE(btrip_model_dims(model, dims.data(), dims.size(), &ndims) == BTRIP_OK);
  CHECK(dims.front() == 10);
  CHECK(dims.back() == 2);

  const int ks[4] = {1, 4, 8, 16};
  double recall[4];
  REQUIRE(btrip_evaluate(model, data, "val", ks, 4, 0, recall) == BTRIP_OK);
  for (int i = 0; i < 4; ++i) CHECK(recall[i] == best[i]);

  std::vector<double> x(2 * 10, 0.5), y(2 * 2);
  CHECK(btrip_model_embed(model, x.data(), 2, y.data()) == BTRIP_OK);
  CHECK(y[0] == y[2]);

  size_t idx[5];
  int lbl[5], qlabel = -1;
  double dist[5];
  REQUIRE(btrip_retrieve(model, data, "test", 0, 5, 0, &qlabel, idx, lbl, dist) == BTRIP_OK);
  for (int i = 1; i < 5; ++i) CHECK(dist[i] >= dist[i - 1]);
  CHECK(btrip_retrieve(model, data, "test", 1u << 30, 5, 0, &qlabel, idx, lbl, dist) == BTRIP_E_DATA);

  std::remove(ckpt.c_str());
  CHECK(btrip_model_load(ckpt.c_str(), &model) == BTRIP_E_DATA);

  btrip_model_destroy(model);
  btrip_run_destroy(run);
  btrip_data_destroy(data);
  btrip_config_destroy(cfg);
}

TEST_CASE("synthetic IDX through the C API") {
  const std::string img = tmp("btrip_capi_img.idx.gz"), lbl = tmp("btrip_capi_lbl.idx.gz");
  REQUIRE(btrip_synth_blobs(4, 10, 6, 1.0, 3, 1, img.c_str(), lbl.c_str()) == BTRIP_OK);
  CHECK(btrip_synth_blobs(40, 10, 6, 1.0, 3, 1, img.c_str(), lbl.c_str()) == BTRIP_E_CONFIG);
}

TEST_CASE("tracker, sampler and loss") {
  btrip_tracker* t = nullptr;
  REQUIRE(btrip_tracker_create(2, 1, BTRIP_COV_STANDARD, &t) == BTRIP_OK);
  const double v1[4] = {0, 2, 10, 12};
  const int l1[4] = {0, 0, 1, 1};
  REQUIRE(btrip_tracker_observe(t, v1, l1, 4) == BTRIP_OK);
  const double v2[2] = {4, 6};
  const int l2[2] = {0, 0};
  REQUIRE(btrip_tracker_observe(t, v2, l2, 2) == BTRIP_OK);
  double mean = 0, cov = 0, scatter = 0;
  size_t n0 = 0;
  REQUIRE(btrip_tracker_state(t, 0, &mean, &cov, &scatter, &n0) == BTRIP_OK);
  CHECK(mean == doctest::Approx(3.0));
  CHECK(scatter == doctest::Approx(20.0));
  CHECK(cov == doctest::Approx(10.0));
  CHECK(n0 == 4);
  CHECK(btrip_tracker_state(t, 5, &mean, nullptr, nullptr, nullptr) == BTRIP_E_DATA);

  double pos[4], neg[4], pos2[4], neg2[4];
  REQUIRE(btrip_sample_triplets(t, v1, l1, 4, 7, 1e-6, pos, neg) == BTRIP_OK);
  REQUIRE(btrip_sample_triplets(t, v1, l1, 4, 7, 1e-6, pos2, neg2) == BTRIP_OK);
  for (int i = 0; i < 4; ++i) {
    CHECK(pos[i] == pos2[i]);
    CHECK(neg[i] == neg2[i]);
  }

  const double a[2] = {0, 0}, p[2] = {1, 0}, n[2] = {1.1, 0};
  double value = 0, ga[2], gp[2], gn[2];
  REQUIRE(btrip_loss(BTRIP_LOSS_TRIPLET, a, p, n, 1, 1, 2, 0.25, &value, ga, gp, gn) == BTRIP_OK);
  CHECK(value == doctest::Approx(0.04));
  CHECK(ga[0] == doctest::Approx(0.2));
  const double n2[2] = {2, 0};
  REQUIRE(btrip_loss(BTRIP_LOSS_NCA, a, p, n2, 1, 1, 2, 0.0, &value, nullptr, nullptr, nullptr) == BTRIP_OK);
  CHECK(value == doctest::Approx(-3.0));
  CHECK(btrip_loss(BTRIP_LOSS_TRIPLET, a, p, n, 1, 1, 2, -1.0, &value, nullptr, nullptr, nullptr) == BTRIP_E_CONFIG);

  btrip_tracker_destroy(t);
}
