#pragma once

// Training loop: embed, update class trackers, sample triplets, step the
// network; validate once per epoch with early stopping on R@1.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "btrip/class_tracker.hpp"
#include "btrip/data_io.hpp"
#include "btrip/embedder.hpp"
#include "btrip/eval.hpp"
#include "btrip/losses.hpp"

namespace btrip {

enum class DatasetKind { Mnist, Blobs };

struct TrainConfig {
  DatasetKind dataset = DatasetKind::Blobs;
  LossKind loss = LossKind::Triplet;
  CovMode cov_mode = CovMode::Standard;

  std::size_t embed_dim = 16;
  std::vector<std::size_t> hidden = {64};
  std::size_t n_prime = 5;
  double margin = 0.25;
  double lr = 2e-5;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  double eps_scale = 1e-6;
  bool accumulate_across_epochs = true;
  bool normalize_embeddings = false;
  bool log_wall_time = false;

  // MNIST
  std::filesystem::path data_dir = "data/mnist";
  std::size_t train_limit = 0;  // 0 = everything
  std::size_t val_limit = 0;
  std::size_t test_limit = 0;
  double val_fraction = 0.3;

  // synthetic blobs
  std::size_t blobs_classes = 3;
  std::size_t blobs_per_class = 100;
  std::size_t blobs_dim = 10;
  double blobs_spread = 1.0;

  // outputs; empty = not written
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_json;
  std::filesystem::path checkpoint;
};

/// Every key accepted by apply_setting().
std::vector<std::string> config_keys();

/// Throws ConfigError on unknown keys or unparsable values.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Flat key=value file; '#' starts a comment.
void load_config_file(TrainConfig& cfg, const std::filesystem::path& path);

/// Throws ConfigError when an invariant is violated.
void validate_config(const TrainConfig& cfg);

/// Applies BTRIP_DATA_DIR when set.
void apply_environment(TrainConfig& cfg);

std::string config_to_text(const TrainConfig& cfg);
/// Text form of one key; throws ConfigError for unknown keys.
std::string config_value(const TrainConfig& cfg, const std::string& key);

struct DataSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

DataSplits load_splits(const TrainConfig& cfg);

enum class Split { Train, Val, Test };
Split parse_split(const std::string& name);
const Dataset& split_of(const DataSplits& splits, Split s);

inline constexpr int kReportedKs[4] = {1, 4, 8, 16};

struct MetricsRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  std::optional<std::map<int, double>> recall;  // set on the last batch of each epoch
  double seconds = 0.0;
};

struct TrainResult {
  MlpModel model;          // best validation R@1
  MlpModel initial_model;  // parameters before the first step
  std::vector<MetricsRecord> records;
  std::map<int, double> baseline;  // untrained model on the validation split
  std::map<int, double> best_val;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

using ProgressFn = std::function<void(const MetricsRecord&)>;

TrainResult train(const TrainConfig& cfg, const DataSplits& data, const ProgressFn& on_epoch = {});

/// Writes the CSV/JSON/checkpoint outputs configured in cfg.
void write_outputs(const TrainConfig& cfg, const TrainResult& result);

std::string metrics_csv(const std::vector<MetricsRecord>& records);
std::string summary_json(const TrainConfig& cfg, const TrainResult& result);

EmbeddedSet embed_dataset(const MlpModel& model, const Dataset& ds, bool normalize);

/// Recall@k for `ks` that fit the split size. Throws DimensionMismatch if the
/// model input width differs from the dataset.
std::map<int, double> evaluate(const MlpModel& model, const Dataset& ds, std::span<const int> ks, bool normalize);

struct Retrieval {
  std::size_t index = 0;
  int label = 0;
  double distance = 0.0;
};

/// k nearest items to item `query_index` of `ds`, the query itself excluded.
std::vector<Retrieval> retrieve(const MlpModel& model, const Dataset& ds, std::size_t query_index, std::size_t k,
                                bool normalize);

}  // namespace btrip
