#include "btrip/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "btrip/error.hpp"

namespace btrip {

namespace {

// Independent streams per concern so changing one consumer leaves the others intact.
constexpr std::uint64_t kDataStream = 0xD47A5EEDULL;
constexpr std::uint64_t kTestStream = 0x7E575EEDULL;
constexpr std::uint64_t kInitStream = 0x1A17ULL;
constexpr std::uint64_t kBatchStream = 0xBA7CULL;
constexpr std::uint64_t kSampleStream = 0x5A3AULL;

Rng stream(std::uint64_t seed, std::uint64_t tag) { return Rng(seed * 0x9E3779B97F4A7C15ULL ^ tag); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::ConfigError, "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true/false");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t n = parse_size(key, trim(item));
    if (n == 0) bad_value(key, v, "positive layer widths");
    out.push_back(n);
  }
  return out;
}

struct Setter {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  using C = TrainConfig;
  using S = const std::string&;
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"dataset",
       {[](C& c, S k, S v) {
          if (v == "mnist") c.dataset = DatasetKind::Mnist;
          else if (v == "blobs") c.dataset = DatasetKind::Blobs;
          else bad_value(k, v, "mnist|blobs");
        },
        [](const C& c) { return std::string(c.dataset == DatasetKind::Mnist ? "mnist" : "blobs"); }}},
      {"loss",
       {[](C& c, S k, S v) {
          if (v == "but" || v == "triplet") c.loss = LossKind::Triplet;
          else if (v == "bunca" || v == "nca") c.loss = LossKind::Nca;
          else bad_value(k, v, "but|bunca");
        },
        [](const C& c) { return std::string(c.loss == LossKind::Triplet ? "but" : "bunca"); }}},
      {"cov_mode",
       {[](C& c, S k, S v) {
          if (v == "standard") c.cov_mode = CovMode::Standard;
          else if (v == "paper-literal") c.cov_mode = CovMode::PaperLiteral;
          else bad_value(k, v, "standard|paper-literal");
        },
        [](const C& c) { return std::string(c.cov_mode == CovMode::Standard ? "standard" : "paper-literal"); }}},
      {"embed_dim", {[](C& c, S k, S v) { c.embed_dim = parse_size(k, v); },
                     [](const C& c) { return std::to_string(c.embed_dim); }}},
      {"hidden", {[](C& c, S k, S v) { c.hidden = parse_size_list(k, v); },
                  [](const C& c) {
                    std::string s;
                    for (std::size_t h : c.hidden) s += (s.empty() ? "" : ",") + std::to_string(h);
                    return s.empty() ? std::string("none") : s;
                  }}},
      {"n_prime", {[](C& c, S k, S v) { c.n_prime = parse_size(k, v); },
                   [](const C& c) { return std::to_string(c.n_prime); }}},
      {"margin", {[](C& c, S k, S v) { c.margin = parse_real(k, v); }, [](const C& c) { return fmt_real(c.margin); }}},
      {"lr", {[](C& c, S k, S v) { c.lr = parse_real(k, v); }, [](const C& c) { return fmt_real(c.lr); }}},
      {"max_epochs", {[](C& c, S k, S v) { c.max_epochs = parse_size(k, v); },
                      [](const C& c) { return std::to_string(c.max_epochs); }}},
      {"patience", {[](C& c, S k, S v) { c.patience = parse_size(k, v); },
                    [](const C& c) { return std::to_string(c.patience); }}},
      {"seed", {[](C& c, S k, S v) { c.seed = parse_u64(k, v); }, [](const C& c) { return std::to_string(c.seed); }}},
      {"eps_scale", {[](C& c, S k, S v) { c.eps_scale = parse_real(k, v); },
                     [](const C& c) { return fmt_real(c.eps_scale); }}},
      {"accumulate_across_epochs", {[](C& c, S k, S v) { c.accumulate_across_epochs = parse_bool(k, v); },
                                    [](const C& c) { return std::string(c.accumulate_across_epochs ? "true" : "false"); }}},
      {"normalize_embeddings", {[](C& c, S k, S v) { c.normalize_embeddings = parse_bool(k, v); },
                                [](const C& c) { return std::string(c.normalize_embeddings ? "true" : "false"); }}},
      {"log_wall_time", {[](C& c, S k, S v) { c.log_wall_time = parse_bool(k, v); },
                         [](const C& c) { return std::string(c.log_wall_time ? "true" : "false"); }}},
      {"data_dir", {[](C& c, S, S v) { c.data_dir = v; }, [](const C& c) { return c.data_dir.string(); }}},
      {"train_limit", {[](C& c, S k, S v) { c.train_limit = parse_size(k, v); },
                       [](const C& c) { return std::to_string(c.train_limit); }}},
      {"val_limit", {[](C& c, S k, S v) { c.val_limit = parse_size(k, v); },
                     [](const C& c) { return std::to_string(c.val_limit); }}},
      {"test_limit", {[](C& c, S k, S v) { c.test_limit = parse_size(k, v); },
                      [](const C& c) { return std::to_string(c.test_limit); }}},
      {"val_fraction", {[](C& c, S k, S v) { c.val_fraction = parse_real(k, v); },
                        [](const C& c) { return fmt_real(c.val_fraction); }}},
      {"blobs_classes", {[](C& c, S k, S v) { c.blobs_classes = parse_size(k, v); },
                         [](const C& c) { return std::to_string(c.blobs_classes); }}},
      {"blobs_per_class", {[](C& c, S k, S v) { c.blobs_per_class = parse_size(k, v); },
                           [](const C& c) { return std::to_string(c.blobs_per_class); }}},
      {"blobs_dim", {[](C& c, S k, S v) { c.blobs_dim = parse_size(k, v); },
                     [](const C& c) { return std::to_string(c.blobs_dim); }}},
      {"blobs_spread", {[](C& c, S k, S v) { c.blobs_spread = parse_real(k, v); },
                        [](const C& c) { return fmt_real(c.blobs_spread); }}},
      {"metrics_csv", {[](C& c, S, S v) { c.metrics_csv = v; }, [](const C& c) { return c.metrics_csv.string(); }}},
      {"summary_json", {[](C& c, S, S v) { c.summary_json = v; }, [](const C& c) { return c.summary_json.string(); }}},
      {"checkpoint", {[](C& c, S, S v) { c.checkpoint = v; }, [](const C& c) { return c.checkpoint.string(); }}},
  };
  return table;
}

const Setter& find_setter(const std::string& key) {
  for (const auto& [name, s] : setters()) {
    if (name == key) return s;
  }
  fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

Dataset prefix(const Dataset& ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  std::vector<std::size_t> idx(limit);
  for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
  return subset(ds, idx);
}

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* suffix : {"", ".gz"}) {
    const auto p = dir / (stem + suffix);
    if (std::filesystem::exists(p)) return p;
  }
  fail(ErrorCode::IoError, "missing " + (dir / stem).string() + "[.gz]");
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = m.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<int> usable_ks(std::span<const int> ks, std::size_t m) {
  std::vector<int> out;
  for (int k : ks) {
    if (k >= 1 && static_cast<std::size_t>(k) < m) out.push_back(k);
  }
  return out;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::NumericFailure, std::string(what) + " is not finite");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, s] : setters()) keys.push_back(name);
  return keys;
}

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
  find_setter(trim(key)).set(cfg, trim(key), trim(value));
}

void load_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

void validate_config(const TrainConfig& cfg) {
  auto bad = [](const std::string& msg) { fail(ErrorCode::ConfigError, msg); };
  if (cfg.embed_dim < 2) bad("embed_dim must be >= 2");
  if (cfg.n_prime < 1) bad("n_prime must be >= 1");
  if (!(cfg.margin >= 0.0)) bad("margin must be >= 0");
  if (!(cfg.lr > 0.0)) bad("lr must be > 0");
  if (cfg.max_epochs < 1) bad("max_epochs must be >= 1");
  if (cfg.patience < 1) bad("patience must be >= 1");
  if (!(cfg.eps_scale >= 0.0)) bad("eps_scale must be >= 0");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) bad("val_fraction must lie in (0, 1)");
  if (cfg.dataset == DatasetKind::Blobs) {
    if (cfg.blobs_classes < 2) bad("blobs_classes must be >= 2");
    if (cfg.blobs_classes > 2 * cfg.blobs_dim) bad("blobs_classes must be <= 2 * blobs_dim");
    if (!(cfg.blobs_spread >= 0.0)) bad("blobs_spread must be >= 0");
  }
}

void apply_environment(TrainConfig& cfg) {
  if (const char* dir = std::getenv("BTRIP_DATA_DIR"); dir != nullptr && *dir != '\0') cfg.data_dir = dir;
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, s] : setters()) out += name + "=" + s.get(cfg) + "\n";
  return out;
}

std::string config_value(const TrainConfig& cfg, const std::string& key) { return find_setter(trim(key)).get(cfg); }

DataSplits load_splits(const TrainConfig& cfg) {
  Rng data_rng = stream(cfg.seed, kDataStream);
  DataSplits out;
  Dataset pool;
  Dataset test;
  if (cfg.dataset == DatasetKind::Blobs) {
    pool = synth_blobs(cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_dim, cfg.blobs_spread, data_rng);
    Rng test_rng = stream(cfg.seed, kTestStream);
    test = synth_blobs(cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_dim, cfg.blobs_spread, test_rng);
  } else {
    pool = load_idx(find_idx(cfg.data_dir, "train-images-idx3-ubyte"), find_idx(cfg.data_dir, "train-labels-idx1-ubyte"));
    test = load_idx(find_idx(cfg.data_dir, "t10k-images-idx3-ubyte"), find_idx(cfg.data_dir, "t10k-labels-idx1-ubyte"));
  }
  auto [train, val] = split_stratified(pool, 1.0 - cfg.val_fraction, data_rng);
  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(std::span<std::size_t>(order), data_rng);
  out.train = prefix(train, cfg.train_limit);
  out.val = prefix(val, cfg.val_limit);
  out.test = prefix(subset(test, order), cfg.test_limit);
  return out;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val" || name == "validation") return Split::Val;
  if (name == "test") return Split::Test;
  fail(ErrorCode::ConfigError, "unknown split '" + name + "' (expected train|val|test)");
}

const Dataset& split_of(const DataSplits& splits, Split s) {
  switch (s) {
    case Split::Train: return splits.train;
    case Split::Val: return splits.val;
    case Split::Test: return splits.test;
  }
  return splits.test;
}

EmbeddedSet embed_dataset(const MlpModel& model, const Dataset& ds, bool normalize) {
  if (ds.input_dim() != model.input_dim()) {
    fail(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.input_dim()) +
                                           " inputs, dataset has " + std::to_string(ds.input_dim()));
  }
  Matrix e = embed(model, ds.inputs);
  if (normalize) e = l2_normalize_rows(e);
  return {std::move(e), ds.labels};
}

std::map<int, double> evaluate(const MlpModel& model, const Dataset& ds, std::span<const int> ks, bool normalize) {
  const EmbeddedSet set = embed_dataset(model, ds, normalize);
  const std::vector<int> use = usable_ks(ks, set.labels.size());
  return recall_at_k(set, use);
}

std::vector<Retrieval> retrieve(const MlpModel& model, const Dataset& ds, std::size_t query_index, std::size_t k,
                                bool normalize) {
  if (query_index >= ds.size()) {
    fail(ErrorCode::IndexOutOfRange, "query index " + std::to_string(query_index) + " outside split of size " +
                                         std::to_string(ds.size()));
  }
  if (k + 1 > ds.size()) fail(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " leaves no room for the query");
  const EmbeddedSet set = embed_dataset(model, ds, normalize);
  std::vector<Retrieval> out;
  for (const Neighbor& n : retrieve_neighbors(set, set.vectors.row(query_index), k + 1)) {
    if (n.index == query_index || out.size() == k) continue;
    out.push_back({n.index, ds.labels[n.index], n.distance});
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const DataSplits& data, const ProgressFn& on_epoch) {
  validate_config(cfg);
  const Dataset& tr = data.train;
  if (tr.num_classes < 2) fail(ErrorCode::DomainError, "training needs at least two classes");

  std::vector<std::size_t> dims{tr.input_dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.embed_dim);

  Rng init_rng = stream(cfg.seed, kInitStream);
  Rng batch_rng = stream(cfg.seed, kBatchStream);
  Rng sample_rng = stream(cfg.seed, kSampleStream);

  TrainResult res;
  MlpModel model = init_params(dims, init_rng);
  ClassTracker tracker(tr.num_classes, cfg.embed_dim, cfg.cov_mode);
  const SamplerOptions sampler{cfg.eps_scale};

  res.baseline = evaluate(model, data.val, kReportedKs, cfg.normalize_embeddings);
  res.model = model;
  res.initial_model = model;
  double best_r1 = -1.0;
  std::size_t since_best = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (!cfg.accumulate_across_epochs) tracker.reset();
    const auto batches = balanced_batches(tr, cfg.n_prime, batch_rng);
    for (std::size_t t = 0; t < batches.size(); ++t) {
      const auto& idx = batches[t];
      const Matrix inputs = gather_rows(tr.inputs, idx);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = tr.labels[idx[i]];

      ForwardResult fwd = forward(model, inputs);
      const Matrix emb = cfg.normalize_embeddings ? l2_normalize_rows(fwd.embeddings) : fwd.embeddings;
      for (double v : emb.data()) check_finite(v, "embedding");

      // distributions are updated before triplets are drawn from them
      tracker.observe(emb, labels);
      const TripletBatch triplets = sample_triplets(emb, labels, tracker, sample_rng, sampler);
      const LossOutput loss = compute_loss(cfg.loss, triplets, cfg.margin);
      check_finite(loss.value, "loss");

      Matrix grad = anchor_gradients(loss);
      if (cfg.normalize_embeddings) grad = l2_normalize_rows_backward(fwd.embeddings, grad);
      sgd_step(model, backward(model, fwd.trace, grad), cfg.lr);

      MetricsRecord rec;
      rec.epoch = epoch;
      rec.batch = t;
      rec.loss = loss.value;
      res.records.push_back(rec);
    }
    res.epochs_run = epoch;

    auto recall = evaluate(model, data.val, kReportedKs, cfg.normalize_embeddings);
    MetricsRecord& last = res.records.back();
    last.recall = recall;
    if (cfg.log_wall_time) {
      last.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    if (on_epoch) on_epoch(last);

    const double r1 = recall.count(1) ? recall.at(1) : 0.0;
    if (r1 > best_r1) {
      best_r1 = r1;
      res.best_val = recall;
      res.best_epoch = epoch;
      res.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  return res;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "epoch,batch,loss,r1,r4,r8,r16,seconds\n";
  for (const MetricsRecord& r : records) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.batch) + "," + fmt_real(r.loss);
    for (int k : kReportedKs) {
      out += ",";
      if (r.recall && r.recall->count(k)) out += fmt_real(r.recall->at(k));
    }
    out += "," + fmt_real(r.seconds) + "\n";
  }
  return out;
}

std::string summary_json(const TrainConfig& cfg, const TrainResult& result) {
  auto recall_obj = [](const std::map<int, double>& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) j["r" + std::to_string(k)] = v;
    return j;
  };
  nlohmann::ordered_json j;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [name, s] : setters()) c[name] = s.get(cfg);
  j["config"] = c;
  j["layer_dims"] = result.model.layer_dims();
  j["baseline_val"] = recall_obj(result.baseline);
  j["best_epoch"] = result.best_epoch;
  j["best_val"] = recall_obj(result.best_val);
  j["epochs_run"] = result.epochs_run;
  j["stopped_early"] = result.stopped_early;
  return j.dump(2) + "\n";
}

void write_outputs(const TrainConfig& cfg, const TrainResult& result) {
  auto write_text = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
    out << text;
    if (!out) fail(ErrorCode::IoError, "failed writing " + p.string());
  };
  if (!cfg.metrics_csv.empty()) write_text(cfg.metrics_csv, metrics_csv(result.records));
  if (!cfg.summary_json.empty()) write_text(cfg.summary_json, summary_json(cfg, result));
  if (!cfg.checkpoint.empty()) save_checkpoint(result.model, cfg.checkpoint);
}

}  // namespace btrip
