#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stethofed/augment.hpp"
#include "stethofed/data_synth.hpp"
#include "stethofed/fed_sim.hpp"
#include "stethofed/metrics.hpp"
#include "stethofed/model.hpp"
#include "stethofed/probe.hpp"
#include "stethofed/text_meta.hpp"

namespace stethofed {

enum class Method { FedAvg, Gain, SpecMask, Mixup, BtsCafe };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
LocalRecipe recipe_for(Method m);

struct ExperimentConfig {
  // Either an explicit device -> manifest map or a directory of
  // <device>.manifest files.
  std::map<std::string, std::filesystem::path> datasets;
  std::filesystem::path data_dir;
  std::vector<std::string> holdout = {"AKGC417L"};
  Method method = Method::BtsCafe;
  FedConfig fed;
  GinConfig gin;
  TextAugConfig text;
  LocalRecipe recipe_overrides;  // mask/mixup knobs only
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::uint64_t split_seed = 7;
  double test_fraction = 0.2;
  std::size_t pool_freq = 8;
  std::size_t pool_time = 8;
  std::size_t hidden = 32;
  std::size_t embed = 16;
  double input_shift = -80.0;
  double input_scale = 10.0;
  bool center_input = true;
  bool eval_each_round = true;
  std::size_t probe_k = 50;
  std::size_t whiten_rank = 2;
  std::filesystem::path output_dir = "runs/default";

  void validate() const;
};

// JSON config file; unknown keys are rejected. Every hyperparameter has an
// explicit key whose default reproduces the method configuration.
// Relative dataset paths resolve against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json_text(const std::string& text,
                                       const std::filesystem::path& base_dir = {});
std::string config_to_json(const ExperimentConfig& cfg);

// All records of every device, in one shared pool.
struct LoadedData {
  Vocabulary vocab;
  std::size_t freq_bins = 0;
  std::size_t time_frames = 0;
  std::shared_ptr<const std::vector<Record>> records;
  std::map<std::string, std::vector<std::size_t>> by_device;  // record indices
};

LoadedData load_data(const ExperimentConfig& cfg);
LoadedData from_dataset(Dataset ds);

struct DeviceSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic 80/20 (by default) split of one device's record indices.
DeviceSplit split_device(std::span<const std::size_t> indices, double test_fraction,
                         std::uint64_t split_seed, std::string_view device);

ModelSpec model_spec_for(const ExperimentConfig& cfg, const LoadedData& data);

Confusion confusion_of(const FlatModel& m, const ClientShard& shard);

struct SeedResult {
  std::uint64_t seed = 0;
  MetricsRecord ind;  // unweighted mean over training devices
  MetricsRecord ood;  // unweighted mean over held-out devices
  std::map<std::string, MetricsRecord> per_device;
  std::uint64_t holdout_reads_during_training = 0;
  FlatModel model;
  std::vector<RoundReport> rounds;
};

struct ExperimentSummary {
  Method method = Method::BtsCafe;
  std::vector<std::string> holdout;
  std::vector<SeedResult> seeds;
  MetricsRecord mean_ind;
  MetricsRecord mean_ood;
};

// Mean of S_p and S_e across records, with score recomputed from the means.
MetricsRecord average_metrics(std::span<const MetricsRecord> records);

SeedResult run_seed(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t seed);
ExperimentSummary run_experiment(const ExperimentConfig& cfg, const LoadedData& data);

// Writes rounds_seed<k>.jsonl, model_seed<k>.ckpt, config.json and
// summary.json into cfg.output_dir.
void write_experiment(const ExperimentConfig& cfg, const ExperimentSummary& summary);

struct ProbeOptions {
  std::size_t k = 50;
  std::size_t whiten_rank = 2;
  bool test_split_only = true;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 7;
};

struct ProbeReport {
  double device_raw = 0.0, device_mean = 0.0, device_whitened = 0.0;
  double disease_raw = 0.0, disease_mean = 0.0, disease_whitened = 0.0;
  EmbeddingSet raw;
};

// Untrained encoder standing in for a zero-shot backbone: the seeded initial
// model on the fixed front-end, with per-sample centering switched off.
FlatModel zero_shot_encoder(const ExperimentConfig& cfg, const LoadedData& data,
                            std::uint64_t seed);

EmbeddingSet collect_embeddings(const FlatModel& m, const LoadedData& data,
                                const ProbeOptions& opts);
// Throws DegenerateEmbedding when every vector coincides.
ProbeReport run_probe(const EmbeddingSet& embeddings, const ProbeOptions& opts);
std::string format_probe_report(const ProbeReport& r);

// Plain-text table (S_p, S_e, Score per IND/OOD) over every summary.json
// found under runs_dir.
std::string format_report(const std::filesystem::path& runs_dir);

}  // namespace stethofed
