#include "btrip/btrip.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "btrip/class_tracker.hpp"
#include "btrip/data_io.hpp"
#include "btrip/error.hpp"
#include "btrip/harness.hpp"
#include "btrip/losses.hpp"
#include "btrip/triplet_sampler.hpp"

struct btrip_config {
  btrip::TrainConfig cfg;
};

struct btrip_data {
  btrip::DataSplits splits;
};

struct btrip_model {
  btrip::MlpModel model;
};

struct btrip_run {
  btrip::TrainConfig cfg;
  btrip::TrainResult result;
};

struct btrip_tracker {
  btrip::ClassTracker tracker;
};

namespace {

thread_local std::string g_last_error;

btrip_status status_for(btrip::ErrorCode code) {
  using btrip::ErrorCode;
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::DomainError:
      return BTRIP_E_CONFIG;
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NumericFailure:
      return BTRIP_E_NUMERIC;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EmptySlice:
    case ErrorCode::UninitializedClass:
    case ErrorCode::StaleTrace:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedFile:
    case ErrorCode::CountMismatch:
    case ErrorCode::InsufficientClassInstances:
    case ErrorCode::KTooLarge:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::IoError:
      return BTRIP_E_DATA;
  }
  return BTRIP_E_INTERNAL;
}

btrip_status set_error(btrip_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
btrip_status guard(F&& f) noexcept {
  try {
    f();
    return BTRIP_OK;
  } catch (const btrip::Error& e) {
    return set_error(status_for(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(BTRIP_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(BTRIP_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(BTRIP_E_INTERNAL, "unknown error");
  }
}

#define BTRIP_REQUIRE(cond)                                                  \
  do {                                                                       \
    if (!(cond)) return set_error(BTRIP_E_ARGUMENT, "invalid argument: " #cond); \
  } while (0)

btrip_status copy_text(const std::string& text, char* buf, std::size_t cap, std::size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buf == nullptr) return BTRIP_OK;
  if (cap < text.size() + 1) return set_error(BTRIP_E_ARGUMENT, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return BTRIP_OK;
}

void fill_reported(const std::map<int, double>& m, double* out) {
  for (std::size_t i = 0; i < 4; ++i) {
    const int k = btrip::kReportedKs[i];
    out[i] = m.count(k) ? m.at(k) : std::numeric_limits<double>::quiet_NaN();
  }
}

btrip::Matrix to_matrix(const double* data, std::size_t rows, std::size_t cols) {
  btrip::Matrix m(rows, cols);
  if (rows * cols > 0) std::memcpy(m.data().data(), data, rows * cols * sizeof(double));
  return m;
}

}  // namespace

extern "C" {

const char* btrip_last_error(void) { return g_last_error.c_str(); }

const char* btrip_version(void) { return "0.1.0"; }

btrip_status btrip_config_create(btrip_config** out) {
  BTRIP_REQUIRE(out);
  return guard([&] { *out = new btrip_config{}; });
}

void btrip_config_destroy(btrip_config* cfg) { delete cfg; }

btrip_status btrip_config_set(btrip_config* cfg, const char* key, const char* value) {
  BTRIP_REQUIRE(cfg && key && value);
  return guard([&] { btrip::apply_setting(cfg->cfg, key, value); });
}

btrip_status btrip_config_load_file(btrip_config* cfg, const char* path) {
  BTRIP_REQUIRE(cfg && path);
  return guard([&] { btrip::load_config_file(cfg->cfg, path); });
}

btrip_status btrip_config_apply_env(btrip_config* cfg) {
  BTRIP_REQUIRE(cfg);
  return guard([&] { btrip::apply_environment(cfg->cfg); });
}

btrip_status btrip_config_validate(const btrip_config* cfg) {
  BTRIP_REQUIRE(cfg);
  return guard([&] { btrip::validate_config(cfg->cfg); });
}

btrip_status btrip_config_get(const btrip_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  BTRIP_REQUIRE(cfg && key);
  std::string text;
  if (auto s = guard([&] { text = btrip::config_value(cfg->cfg, key); }); s != BTRIP_OK) return s;
  return copy_text(text, buf, cap, needed);
}

btrip_status btrip_config_dump(const btrip_config* cfg, char* buf, size_t cap, size_t* needed) {
  BTRIP_REQUIRE(cfg);
  std::string text;
  if (auto s = guard([&] { text = btrip::config_to_text(cfg->cfg); }); s != BTRIP_OK) return s;
  return copy_text(text, buf, cap, needed);
}

btrip_status btrip_data_load(const btrip_config* cfg, btrip_data** out) {
  BTRIP_REQUIRE(cfg && out);
  return guard([&] {
    btrip::validate_config(cfg->cfg);
    *out = new btrip_data{btrip::load_splits(cfg->cfg)};
  });
}

void btrip_data_destroy(btrip_data* data) { delete data; }

btrip_status btrip_data_split_info(const btrip_data* data, const char* split, size_t* count, size_t* input_dim,
                                   size_t* num_classes) {
  BTRIP_REQUIRE(data && split);
  return guard([&] {
    const btrip::Dataset& ds = btrip::split_of(data->splits, btrip::parse_split(split));
    if (count) *count = ds.size();
    if (input_dim) *input_dim = ds.input_dim();
    if (num_classes) *num_classes = ds.num_classes;
  });
}

btrip_status btrip_train(const btrip_config* cfg, const btrip_data* data, btrip_epoch_callback on_epoch, void* user,
                         btrip_run** out) {
  BTRIP_REQUIRE(cfg && data && out);
  return guard([&] {
    btrip::ProgressFn progress;
    if (on_epoch) {
      progress = [on_epoch, user](const btrip::MetricsRecord& rec) {
        double recall[4];
        fill_reported(rec.recall ? *rec.recall : std::map<int, double>{}, recall);
        on_epoch(rec.epoch, rec.loss, recall, user);
      };
    }
    auto* run = new btrip_run{cfg->cfg, {}};
    try {
      run->result = btrip::train(cfg->cfg, data->splits, progress);
    } catch (...) {
      delete run;
      throw;
    }
    *out = run;
  });
}

void btrip_run_destroy(btrip_run* run) { delete run; }

btrip_status btrip_run_write_outputs(const btrip_run* run) {
  BTRIP_REQUIRE(run);
  return guard([&] { btrip::write_outputs(run->cfg, run->result); });
}

btrip_status btrip_run_summary(const btrip_run* run, size_t* best_epoch, size_t* epochs_run, int* stopped_early,
                               double best_val[4], double baseline_val[4]) {
  BTRIP_REQUIRE(run);
  if (best_epoch) *best_epoch = run->result.best_epoch;
  if (epochs_run) *epochs_run = run->result.epochs_run;
  if (stopped_early) *stopped_early = run->result.stopped_early ? 1 : 0;
  if (best_val) fill_reported(run->result.best_val, best_val);
  if (baseline_val) fill_reported(run->result.baseline, baseline_val);
  return BTRIP_OK;
}

btrip_status btrip_run_model(const btrip_run* run, btrip_model** out) {
  BTRIP_REQUIRE(run && out);
  return guard([&] { *out = new btrip_model{run->result.model}; });
}

btrip_status btrip_run_metrics_csv(const btrip_run* run, char* buf, size_t cap, size_t* needed) {
  BTRIP_REQUIRE(run);
  return copy_text(btrip::metrics_csv(run->result.records), buf, cap, needed);
}

btrip_status btrip_model_load(const char* path, btrip_model** out) {
  BTRIP_REQUIRE(path && out);
  return guard([&] { *out = new btrip_model{btrip::load_checkpoint(path)}; });
}

btrip_status btrip_model_save(const btrip_model* model, const char* path) {
  BTRIP_REQUIRE(model && path);
  return guard([&] { btrip::save_checkpoint(model->model, path); });
}

void btrip_model_destroy(btrip_model* model) { delete model; }

btrip_status btrip_model_dims(const btrip_model* model, size_t* dims, size_t cap, size_t* count) {
  BTRIP_REQUIRE(model);
  const auto& d = model->model.layer_dims();
  if (count) *count = d.size();
  if (dims == nullptr) return BTRIP_OK;
  if (cap < d.size()) return set_error(BTRIP_E_ARGUMENT, "dims buffer too small");
  for (std::size_t i = 0; i < d.size(); ++i) dims[i] = d[i];
  return BTRIP_OK;
}

btrip_status btrip_model_embed(const btrip_model* model, const double* inputs, size_t rows, double* out) {
  BTRIP_REQUIRE(model && (rows == 0 || (inputs && out)));
  return guard([&] {
    const btrip::Matrix e = btrip::embed(model->model, to_matrix(inputs, rows, model->model.input_dim()));
    if (!e.empty()) std::memcpy(out, e.data().data(), e.data().size() * sizeof(double));
  });
}

btrip_status btrip_evaluate(const btrip_model* model, const btrip_data* data, const char* split, const int* ks,
                            size_t nks, int normalize, double* out_recall) {
  BTRIP_REQUIRE(model && data && split && (nks == 0 || (ks && out_recall)));
  return guard([&] {
    const btrip::Dataset& ds = btrip::split_of(data->splits, btrip::parse_split(split));
    const btrip::EmbeddedSet set = btrip::embed_dataset(model->model, ds, normalize != 0);
    const auto recall = btrip::recall_at_k(set, std::span<const int>(ks, nks));
    for (std::size_t i = 0; i < nks; ++i) out_recall[i] = recall.at(ks[i]);
  });
}

btrip_status btrip_retrieve(const btrip_model* model, const btrip_data* data, const char* split, size_t query,
                            size_t k, int normalize, int* query_label, size_t* out_index, int* out_label,
                            double* out_distance) {
  BTRIP_REQUIRE(model && data && split && (k == 0 || out_index));
  return guard([&] {
    const btrip::Dataset& ds = btrip::split_of(data->splits, btrip::parse_split(split));
    const auto hits = btrip::retrieve(model->model, ds, query, k, normalize != 0);
    if (query_label) *query_label = ds.labels[query];
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out_index[i] = hits[i].index;
      if (out_label) out_label[i] = hits[i].label;
      if (out_distance) out_distance[i] = hits[i].distance;
    }
  });
}

btrip_status btrip_synth_blobs(size_t classes, size_t per_class, size_t input_dim, double spread, uint64_t seed,
                               int exact, const char* images_path, const char* labels_path) {
  BTRIP_REQUIRE(images_path && labels_path);
  return guard([&] {
    btrip::Rng rng(seed);
    const btrip::Dataset ds = btrip::synth_blobs(classes, per_class, input_dim, spread, rng);
    btrip::write_idx(ds, images_path, labels_path, exact ? btrip::IdxPixelType::Float64 : btrip::IdxPixelType::UByte);
  });
}

btrip_status btrip_tracker_create(size_t num_classes, size_t dim, btrip_cov_mode mode, btrip_tracker** out) {
  BTRIP_REQUIRE(out);
  BTRIP_REQUIRE(mode == BTRIP_COV_STANDARD || mode == BTRIP_COV_PAPER_LITERAL);
  return guard([&] {
    const auto m = mode == BTRIP_COV_STANDARD ? btrip::CovMode::Standard : btrip::CovMode::PaperLiteral;
    *out = new btrip_tracker{btrip::ClassTracker(num_classes, dim, m)};
  });
}

void btrip_tracker_destroy(btrip_tracker* tracker) { delete tracker; }

btrip_status btrip_tracker_reset(btrip_tracker* tracker) {
  BTRIP_REQUIRE(tracker);
  tracker->tracker.reset();
  return BTRIP_OK;
}

btrip_status btrip_tracker_observe(btrip_tracker* tracker, const double* vectors, const int* labels, size_t count) {
  BTRIP_REQUIRE(tracker && (count == 0 || (vectors && labels)));
  return guard([&] {
    tracker->tracker.observe(to_matrix(vectors, count, tracker->tracker.dim()), std::span<const int>(labels, count));
  });
}

btrip_status btrip_tracker_state(const btrip_tracker* tracker, int class_id, double* mean, double* cov,
                                 double* scatter, size_t* n0) {
  BTRIP_REQUIRE(tracker);
  return guard([&] {
    const btrip::ClassState& st = tracker->tracker.state(class_id);
    if (mean) std::memcpy(mean, st.mean0.data(), st.mean0.size() * sizeof(double));
    if (cov) std::memcpy(cov, st.cov0.data().data(), st.cov0.data().size() * sizeof(double));
    if (scatter) std::memcpy(scatter, st.scatter.data().data(), st.scatter.data().size() * sizeof(double));
    if (n0) *n0 = st.n0;
  });
}

btrip_status btrip_sample_triplets(const btrip_tracker* tracker, const double* anchors, const int* labels,
                                   size_t count, uint64_t seed, double eps_scale, double* positives,
                                   double* negatives) {
  BTRIP_REQUIRE(tracker && (count == 0 || (anchors && labels && positives && negatives)));
  return guard([&] {
    const std::size_t d = tracker->tracker.dim();
    btrip::Rng rng(seed);
    const auto batch = btrip::sample_triplets(to_matrix(anchors, count, d), std::span<const int>(labels, count),
                                              tracker->tracker, rng, btrip::SamplerOptions{eps_scale});
    const std::size_t per = tracker->tracker.num_classes() - 1;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t k = 0; k < per; ++k) {
        std::memcpy(positives + (i * per + k) * d, batch.groups[i].positives[k].data(), d * sizeof(double));
        std::memcpy(negatives + (i * per + k) * d, batch.groups[i].negatives[k].data(), d * sizeof(double));
      }
    }
  });
}

btrip_status btrip_loss(btrip_loss_kind kind, const double* anchors, const double* positives, const double* negatives,
                        size_t count, size_t per_anchor, size_t dim, double margin, double* value,
                        double* grad_anchors, double* grad_positives, double* grad_negatives) {
  BTRIP_REQUIRE(value && (count == 0 || (anchors && positives && negatives)));
  BTRIP_REQUIRE(kind == BTRIP_LOSS_TRIPLET || kind == BTRIP_LOSS_NCA);
  return guard([&] {
    btrip::TripletBatch batch;
    for (std::size_t i = 0; i < count; ++i) {
      btrip::AnchorGroup g;
      g.anchor.assign(anchors + i * dim, anchors + (i + 1) * dim);
      for (std::size_t k = 0; k < per_anchor; ++k) {
        const double* p = positives + (i * per_anchor + k) * dim;
        const double* n = negatives + (i * per_anchor + k) * dim;
        g.positives.emplace_back(p, p + dim);
        g.negatives.emplace_back(n, n + dim);
      }
      batch.groups.push_back(std::move(g));
    }
    const auto out = btrip::compute_loss(kind == BTRIP_LOSS_TRIPLET ? btrip::LossKind::Triplet : btrip::LossKind::Nca,
                                         batch, margin);
    *value = out.value;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& g = out.grads[i];
      if (grad_anchors) std::memcpy(grad_anchors + i * dim, g.anchor.data(), dim * sizeof(double));
      for (std::size_t k = 0; k < per_anchor; ++k) {
        if (grad_positives) std::memcpy(grad_positives + (i * per_anchor + k) * dim, g.positives[k].data(), dim * sizeof(double));
        if (grad_negatives) std::memcpy(grad_negatives + (i * per_anchor + k) * dim, g.negatives[k].data(), dim * sizeof(double));
      }
    }
  });
}

}  // extern "C"
