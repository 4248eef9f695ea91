// btrip command line: train / eval / retrieve / synth, built on the C API.

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "btrip/btrip.h"

namespace {

struct ConfigDeleter {
  void operator()(btrip_config* c) const { btrip_config_destroy(c); }
};
struct DataDeleter {
  void operator()(btrip_data* d) const { btrip_data_destroy(d); }
};
struct ModelDeleter {
  void operator()(btrip_model* m) const { btrip_model_destroy(m); }
};
struct RunDeleter {
  void operator()(btrip_run* r) const { btrip_run_destroy(r); }
};
using ConfigPtr = std::unique_ptr<btrip_config, ConfigDeleter>;
using DataPtr = std::unique_ptr<btrip_data, DataDeleter>;
using ModelPtr = std::unique_ptr<btrip_model, ModelDeleter>;
using RunPtr = std::unique_ptr<btrip_run, RunDeleter>;

// Carries a C-API status out of the command handlers.
struct Failure {
  btrip_status status;
};

void check(btrip_status s) {
  if (s != BTRIP_OK) {
    std::fprintf(stderr, "btrip: %s\n", btrip_last_error());
    throw Failure{s};
  }
}

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> settings;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.config_file, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", args.settings, "override a config key (key=value), repeatable");
}

void set(btrip_config* cfg, const std::string& key, const std::string& value) {
  check(btrip_config_set(cfg, key.c_str(), value.c_str()));
}

// Precedence: defaults < config file < BTRIP_DATA_DIR < --set / flags.
ConfigPtr build_config(const ConfigArgs& args) {
  btrip_config* raw = nullptr;
  check(btrip_config_create(&raw));
  ConfigPtr cfg(raw);
  if (!args.config_file.empty()) check(btrip_config_load_file(cfg.get(), args.config_file.c_str()));
  check(btrip_config_apply_env(cfg.get()));
  for (const std::string& kv : args.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "btrip: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{BTRIP_E_CONFIG};
    }
    set(cfg.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string get(const btrip_config* cfg, const char* key) {
  std::size_t n = 0;
  check(btrip_config_get(cfg, key, nullptr, 0, &n));
  std::string s(n, '\0');
  check(btrip_config_get(cfg, key, s.data(), s.size(), &n));
  s.resize(n - 1);
  return s;
}

DataPtr load_data(const btrip_config* cfg) {
  btrip_data* raw = nullptr;
  check(btrip_data_load(cfg, &raw));
  return DataPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  btrip_model* raw = nullptr;
  check(btrip_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

void print_epoch(std::size_t epoch, double loss, const double recall[4], void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "epoch %3zu  loss %12.5g  R@1 %.4f  R@4 %.4f  R@8 %.4f  R@16 %.4f\n", epoch, loss, recall[0],
               recall[1], recall[2], recall[3]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming Bayesian triplet sampling: train and evaluate embedding networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(btrip_version()));

  // train
  ConfigArgs train_cfg;
  std::string train_metrics, train_summary, train_checkpoint;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "train a network with distribution-sampled triplets");
  add_config_args(train, train_cfg);
  train->add_option("--metrics", train_metrics, "metrics CSV path");
  train->add_option("--summary", train_summary, "summary JSON path");
  train->add_option("--checkpoint", train_checkpoint, "best-model checkpoint path");
  train->add_flag("-q,--quiet", quiet, "no per-epoch progress on stderr");

  // eval
  ConfigArgs eval_cfg;
  std::string eval_checkpoint, eval_split = "test";
  std::vector<int> eval_ks = {1, 4, 8, 16};
  auto* eval = app.add_subcommand("eval", "Recall@k of a checkpoint on a data split");
  add_config_args(eval, eval_cfg);
  eval->add_option("checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train|val|test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--ks", eval_ks, "k values")->delimiter(',');

  // retrieve
  ConfigArgs ret_cfg;
  std::string ret_checkpoint, ret_split = "test";
  std::size_t ret_query = 0, ret_k = 10;
  auto* retrieve = app.add_subcommand("retrieve", "nearest neighbours of one item in embedding space");
  add_config_args(retrieve, ret_cfg);
  retrieve->add_option("checkpoint", ret_checkpoint, "checkpoint file")->required();
  retrieve->add_option("--split", ret_split, "train|val|test")->check(CLI::IsMember({"train", "val", "test"}));
  retrieve->add_option("-i,--query", ret_query, "query index within the split");
  retrieve->add_option("-k", ret_k, "number of retrievals");

  // synth
  std::size_t syn_classes = 3, syn_per_class = 100, syn_dim = 10;
  double syn_spread = 1.0;
  std::uint64_t syn_seed = 1;
  bool syn_ubyte = false;
  std::string syn_images, syn_labels;
  auto* synth = app.add_subcommand("synth", "write a synthetic Gaussian-blob dataset as IDX files");
  synth->add_option("--classes", syn_classes, "number of classes");
  synth->add_option("--per-class", syn_per_class, "instances per class");
  synth->add_option("--dim", syn_dim, "input dimension q");
  synth->add_option("--spread", syn_spread, "per-class standard deviation");
  synth->add_option("--seed", syn_seed, "random seed");
  synth->add_flag("--ubyte", syn_ubyte, "store pixels as bytes (x * 255) instead of float64");
  synth->add_option("images", syn_images, "images IDX path (.gz compresses)")->required();
  synth->add_option("labels", syn_labels, "labels IDX path (.gz compresses)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : BTRIP_E_CONFIG;
  }

  try {
    if (*train) {
      ConfigPtr cfg = build_config(train_cfg);
      if (!train_metrics.empty()) set(cfg.get(), "metrics_csv", train_metrics);
      if (!train_summary.empty()) set(cfg.get(), "summary_json", train_summary);
      if (!train_checkpoint.empty()) set(cfg.get(), "checkpoint", train_checkpoint);
      check(btrip_config_validate(cfg.get()));
      DataPtr data = load_data(cfg.get());
      btrip_run* raw = nullptr;
      check(btrip_train(cfg.get(), data.get(), print_epoch, &quiet, &raw));
      RunPtr run(raw);
      check(btrip_run_write_outputs(run.get()));
      std::size_t best_epoch = 0, epochs = 0;
      int early = 0;
      double best[4], base[4];
      check(btrip_run_summary(run.get(), &best_epoch, &epochs, &early, best, base));
      std::printf("epochs_run=%zu best_epoch=%zu stopped_early=%s\n", epochs, best_epoch, early ? "true" : "false");
      std::printf("baseline_val R@1=%.4f R@4=%.4f R@8=%.4f R@16=%.4f\n", base[0], base[1], base[2], base[3]);
      std::printf("best_val     R@1=%.4f R@4=%.4f R@8=%.4f R@16=%.4f\n", best[0], best[1], best[2], best[3]);
    } else if (*eval) {
      ConfigPtr cfg = build_config(eval_cfg);
      DataPtr data = load_data(cfg.get());
      ModelPtr model = load_model(eval_checkpoint);
      const int normalize = get(cfg.get(), "normalize_embeddings") == "true";
      std::vector<double> recall(eval_ks.size());
      check(btrip_evaluate(model.get(), data.get(), eval_split.c_str(), eval_ks.data(), eval_ks.size(), normalize,
                           recall.data()));
      std::printf("k,recall\n");
      for (std::size_t i = 0; i < eval_ks.size(); ++i) std::printf("%d,%.6f\n", eval_ks[i], recall[i]);
    } else if (*retrieve) {
      ConfigPtr cfg = build_config(ret_cfg);
      DataPtr data = load_data(cfg.get());
      ModelPtr model = load_model(ret_checkpoint);
      const int normalize = get(cfg.get(), "normalize_embeddings") == "true";
      std::vector<std::size_t> idx(ret_k);
      std::vector<int> labels(ret_k);
      std::vector<double> dist(ret_k);
      int query_label = 0;
      check(btrip_retrieve(model.get(), data.get(), ret_split.c_str(), ret_query, ret_k, normalize, &query_label,
                           idx.data(), labels.data(), dist.data()));
      std::printf("# query %zu label %d\n", ret_query, query_label);
      std::printf("rank,index,label,distance\n");
      for (std::size_t r = 0; r < ret_k; ++r) std::printf("%zu,%zu,%d,%.9g\n", r + 1, idx[r], labels[r], dist[r]);
    } else if (*synth) {
      check(btrip_synth_blobs(syn_classes, syn_per_class, syn_dim, syn_spread, syn_seed, syn_ubyte ? 0 : 1,
                              syn_images.c_str(), syn_labels.c_str()));
      std::printf("wrote %zu instances to %s / %s\n", syn_classes * syn_per_class, syn_images.c_str(),
                  syn_labels.c_str());
    }
  } catch (const Failure& f) {
    return f.status == BTRIP_E_ARGUMENT ? BTRIP_E_CONFIG : static_cast<int>(f.status);
  }
  return 0;
}
