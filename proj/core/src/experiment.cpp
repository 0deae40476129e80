#include "stethofed/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stethofed/checkpoint.hpp"
#include "stethofed/dataset_io.hpp"
#include "stethofed/error.hpp"

namespace stethofed {

using json = nlohmann::ordered_json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::FedAvg: return "fedavg";
    case Method::Gain: return "gain";
    case Method::SpecMask: return "specmask";
    case Method::Mixup: return "mixup";
    case Method::BtsCafe: return "btscafe";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::FedAvg, Method::Gain, Method::SpecMask, Method::Mixup, Method::BtsCafe}) {
    if (to_string(m) == name) return m;
  }
  raise(ErrorKind::Config, "unknown method '" + std::string(name) +
                               "' (expected fedavg, gain, specmask, mixup or btscafe)");
}

LocalRecipe recipe_for(Method m) {
  LocalRecipe r;
  switch (m) {
    case Method::FedAvg: break;
    case Method::Gain: r.augment = AugmentKind::Gain; break;
    case Method::SpecMask: r.augment = AugmentKind::SpecMask; break;
    case Method::Mixup: r.augment = AugmentKind::Mixup; break;
    case Method::BtsCafe:
      r.augment = AugmentKind::Gin;
      r.counterfactual_text = true;
      r.gradient_alignment = true;
      break;
  }
  return r;
}

void ExperimentConfig::validate() const {
  fed.validate();
  gin.validate();
  text.validate();
  if (seeds.empty()) raise(ErrorKind::Config, "at least one seed is required");
  if (holdout.empty()) raise(ErrorKind::Config, "at least one held-out device is required");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    raise(ErrorKind::Config, "test_fraction must lie in (0, 1)");
  }
  if (datasets.empty() && data_dir.empty()) {
    raise(ErrorKind::Config, "config needs either 'datasets' or 'data_dir'");
  }
  if (!(recipe_overrides.mixup_alpha > 0.0)) raise(ErrorKind::Config, "mixup_alpha must be > 0");
  if (probe_k == 0) raise(ErrorKind::Config, "knn_k must be >= 1");
  if (whiten_rank == 0) raise(ErrorKind::Config, "whiten_rank must be >= 1");
}

namespace {

template <typename T>
void take(json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("config key '") + key + "': " + e.what());
  }
  j.erase(key);
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text,
                                       const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) raise(ErrorKind::Config, "config must be a JSON object");

  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (j.contains("datasets")) {
    std::map<std::string, std::string> ds;
    take(j, "datasets", ds);
    for (const auto& [dev, p] : ds) c.datasets[dev] = resolve(p);
  }
  if (j.contains("data_dir")) {
    std::string d;
    take(j, "data_dir", d);
    c.data_dir = resolve(d);
  }
  take(j, "holdout", c.holdout);
  if (j.contains("method")) {
    std::string m;
    take(j, "method", m);
    c.method = parse_method(m);
  }
  take(j, "rounds", c.fed.rounds);
  take(j, "local_epochs", c.fed.local_epochs);
  take(j, "lr", c.fed.lr);
  take(j, "lambda", c.fed.lambda);
  take(j, "t_aug", c.fed.t_aug);
  take(j, "t_w", c.fed.t_w);
  take(j, "batch_size", c.fed.batch_size);
  take(j, "participation", c.fed.participation);
  take(j, "hvp_delta", c.fed.hvp_delta);
  take(j, "parallel_clients", c.fed.parallel_clients);
  if (j.contains("optimizer")) {
    std::string o;
    take(j, "optimizer", o);
    c.fed.optimizer = parse_optimizer(o);
  }
  take(j, "adam_beta1", c.fed.adam_beta1);
  take(j, "adam_beta2", c.fed.adam_beta2);
  take(j, "adam_eps", c.fed.adam_eps);
  take(j, "g_min", c.gin.g_min);
  take(j, "g_max", c.gin.g_max);
  take(j, "alpha_min", c.gin.alpha_min);
  take(j, "gin_blocks", c.gin.num_blocks);
  take(j, "gin_leak_slope", c.gin.leak_slope);
  take(j, "frob_eps", c.gin.frob_eps);
  take(j, "p_text", c.text.p_text);
  take(j, "mask_max_f", c.recipe_overrides.mask_max_f);
  take(j, "mask_max_t", c.recipe_overrides.mask_max_t);
  take(j, "mixup_alpha", c.recipe_overrides.mixup_alpha);
  take(j, "seeds", c.seeds);
  take(j, "split_seed", c.split_seed);
  take(j, "test_fraction", c.test_fraction);
  take(j, "pool_freq", c.pool_freq);
  take(j, "pool_time", c.pool_time);
  take(j, "hidden", c.hidden);
  take(j, "embed", c.embed);
  take(j, "input_shift", c.input_shift);
  take(j, "input_scale", c.input_scale);
  take(j, "center_input", c.center_input);
  take(j, "eval_each_round", c.eval_each_round);
  take(j, "knn_k", c.probe_k);
  take(j, "whiten_rank", c.whiten_rank);
  if (j.contains("output_dir")) {
    std::string o;
    take(j, "output_dir", o);
    c.output_dir = o;
  }
  if (!j.empty()) raise(ErrorKind::Config, "unknown config key '" + j.begin().key() + "'");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Config, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  if (!c.datasets.empty()) {
    json ds = json::object();
    for (const auto& [dev, p] : c.datasets) ds[dev] = p.string();
    j["datasets"] = ds;
  }
  if (!c.data_dir.empty()) j["data_dir"] = c.data_dir.string();
  j["holdout"] = c.holdout;
  j["method"] = std::string(to_string(c.method));
  j["rounds"] = c.fed.rounds;
  j["local_epochs"] = c.fed.local_epochs;
  j["lr"] = c.fed.lr;
  j["lambda"] = c.fed.lambda;
  j["t_aug"] = c.fed.t_aug;
  j["t_w"] = c.fed.t_w;
  j["batch_size"] = c.fed.batch_size;
  j["participation"] = c.fed.participation;
  j["hvp_delta"] = c.fed.hvp_delta;
  j["parallel_clients"] = c.fed.parallel_clients;
  j["optimizer"] = std::string(to_string(c.fed.optimizer));
  j["adam_beta1"] = c.fed.adam_beta1;
  j["adam_beta2"] = c.fed.adam_beta2;
  j["adam_eps"] = c.fed.adam_eps;
  j["g_min"] = c.gin.g_min;
  j["g_max"] = c.gin.g_max;
  j["alpha_min"] = c.gin.alpha_min;
  j["gin_blocks"] = c.gin.num_blocks;
  j["gin_leak_slope"] = c.gin.leak_slope;
  j["frob_eps"] = c.gin.frob_eps;
  j["p_text"] = c.text.p_text;
  j["mask_max_f"] = c.recipe_overrides.mask_max_f;
  j["mask_max_t"] = c.recipe_overrides.mask_max_t;
  j["mixup_alpha"] = c.recipe_overrides.mixup_alpha;
  j["seeds"] = c.seeds;
  j["split_seed"] = c.split_seed;
  j["test_fraction"] = c.test_fraction;
  j["pool_freq"] = c.pool_freq;
  j["pool_time"] = c.pool_time;
  j["hidden"] = c.hidden;
  j["embed"] = c.embed;
  j["input_shift"] = c.input_shift;
  j["input_scale"] = c.input_scale;
  j["center_input"] = c.center_input;
  j["eval_each_round"] = c.eval_each_round;
  j["knn_k"] = c.probe_k;
  j["whiten_rank"] = c.whiten_rank;
  j["output_dir"] = c.output_dir.string();
  return j.dump(2);
}

LoadedData from_dataset(Dataset ds) {
  LoadedData data;
  data.vocab = std::move(ds.vocab);
  data.freq_bins = ds.freq_bins;
  data.time_frames = ds.time_frames;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    data.by_device[ds.records[i].device].push_back(i);
  }
  data.records = std::make_shared<const std::vector<Record>>(std::move(ds.records));
  return data;
}

LoadedData load_data(const ExperimentConfig& cfg) {
  std::map<std::string, std::filesystem::path> files = cfg.datasets;
  if (files.empty()) {
    if (!std::filesystem::is_directory(cfg.data_dir)) {
      raise(ErrorKind::Io, "data directory " + cfg.data_dir.string() + " does not exist");
    }
    for (const auto& entry : std::filesystem::directory_iterator(cfg.data_dir)) {
      if (entry.path().extension() == ".manifest") {
        files[entry.path().stem().string()] = entry.path();
      }
    }
    if (files.empty()) raise(ErrorKind::Io, "no .manifest files in " + cfg.data_dir.string());
  }
  Dataset merged;
  bool first = true;
  for (const auto& [name, path] : files) {
    Dataset ds = read_dataset(path);
    if (first) {
      merged.vocab = ds.vocab;
      merged.freq_bins = ds.freq_bins;
      merged.time_frames = ds.time_frames;
      first = false;
    } else if (!(ds.vocab == merged.vocab) || ds.freq_bins != merged.freq_bins ||
               ds.time_frames != merged.time_frames) {
      raise(ErrorKind::Format, path.string() + " disagrees with the other datasets in "
                                               "vocabulary or grid size");
    }
    for (auto& r : ds.records) merged.records.push_back(std::move(r));
  }
  return from_dataset(std::move(merged));
}

DeviceSplit split_device(std::span<const std::size_t> indices, double test_fraction,
                         std::uint64_t split_seed, std::string_view device) {
  auto stream = RngStream(split_seed).child("split").child(device);
  const auto order = permutation(stream, indices.size());
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(indices.size())));
  if (indices.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, indices.size() - 1);
  DeviceSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? split.test : split.train).push_back(indices[order[i]]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

FlatModel zero_shot_encoder(const ExperimentConfig& cfg, const LoadedData& data,
                            std::uint64_t seed) {
  ModelSpec spec = model_spec_for(cfg, data);
  spec.center_input = false;
  auto stream = RngStream(seed).child("init");
  return init_model(spec, stream);
}

ModelSpec model_spec_for(const ExperimentConfig& cfg, const LoadedData& data) {
  ModelSpec spec;
  spec.freq_bins = data.freq_bins;
  spec.time_frames = data.time_frames;
  spec.pool_freq = cfg.pool_freq;
  spec.pool_time = cfg.pool_time;
  spec.hidden = cfg.hidden;
  spec.embed = cfg.embed;
  spec.vocab = data.vocab.size();
  spec.input_shift = cfg.input_shift;
  spec.input_scale = cfg.input_scale;
  spec.center_input = cfg.center_input;
  spec.validate();
  return spec;
}

Confusion confusion_of(const FlatModel& m, const ClientShard& shard) {
  Confusion c{};
  for (std::size_t i = 0; i < shard.size(); ++i) {
    const auto& r = shard.read(i);
    c[static_cast<std::size_t>(r.label)][predict(m, r.grid, r.prompt)] += 1;
  }
  return c;
}

MetricsRecord average_metrics(std::span<const MetricsRecord> records) {
  if (records.empty()) raise(ErrorKind::EmptyGroup, "no metrics to average");
  MetricsRecord out;
  for (const auto& r : records) {
    out.specificity += r.specificity;
    out.sensitivity += r.sensitivity;
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      for (std::size_t j = 0; j < kNumClasses; ++j) out.confusion[i][j] += r.confusion[i][j];
    }
  }
  const double n = static_cast<double>(records.size());
  out.specificity /= n;
  out.sensitivity /= n;
  out.score = icbhi_score(out.specificity, out.sensitivity);
  return out;
}

SeedResult run_seed(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t seed) {
  cfg.validate();
  const std::set<std::string> held(cfg.holdout.begin(), cfg.holdout.end());
  for (const auto& h : held) {
    if (!data.by_device.contains(h)) {
      raise(ErrorKind::Config, "held-out device '" + h + "' is not among the datasets");
    }
  }
  if (held.size() >= data.by_device.size()) {
    raise(ErrorKind::Config, "no training devices remain after the hold-out");
  }

  const RngStream root(seed);
  const ModelSpec spec = model_spec_for(cfg, data);
  auto init_stream = root.child("init");
  FederationState state{init_model(spec, init_stream), {}};

  std::vector<ClientShard> test_shards;
  std::vector<ClientShard> holdout_full;
  for (const auto& [device, indices] : data.by_device) {
    const auto split = split_device(indices, cfg.test_fraction, cfg.split_seed, device);
    test_shards.emplace_back("test:" + device, device, data.records, split.test);
    if (held.contains(device)) {
      holdout_full.emplace_back("holdout:" + device, device, data.records, indices);
    } else {
      state.clients.emplace_back(device, device, data.records, split.train);
    }
  }

  TrainingSetup setup{cfg.fed, recipe_for(cfg.method), cfg.gin, cfg.text};
  setup.recipe.mask_max_f = cfg.recipe_overrides.mask_max_f;
  setup.recipe.mask_max_t = cfg.recipe_overrides.mask_max_t;
  setup.recipe.mixup_alpha = cfg.recipe_overrides.mixup_alpha;

  Evaluator evaluate;
  if (cfg.eval_each_round) {
    evaluate = [&](const FlatModel& m) {
      Confusion pooled{};
      for (const auto& shard : test_shards) {
        if (held.contains(shard.device_id())) continue;
        const auto c = confusion_of(m, shard);
        for (std::size_t i = 0; i < kNumClasses; ++i) {
          for (std::size_t j = 0; j < kNumClasses; ++j) pooled[i][j] += c[i][j];
        }
      }
      return compute_metrics(pooled);
    };
  }

  SeedResult result;
  result.seed = seed;
  const auto train_stream = root.child("train");
  for (int t = 1; t <= cfg.fed.rounds; ++t) {
    result.rounds.push_back(run_round(state, t, setup, train_stream, evaluate));
  }

  for (const auto& s : holdout_full) result.holdout_reads_during_training += s.reads();
  for (const auto& s : test_shards) {
    if (held.contains(s.device_id())) result.holdout_reads_during_training += s.reads();
  }

  std::vector<MetricsRecord> ind, ood;
  for (const auto& shard : test_shards) {
    const auto m = compute_metrics(confusion_of(state.global, shard));
    result.per_device[shard.device_id()] = m;
    (held.contains(shard.device_id()) ? ood : ind).push_back(m);
  }
  result.ind = average_metrics(ind);
  result.ood = average_metrics(ood);
  result.model = std::move(state.global);
  return result;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const LoadedData& data) {
  ExperimentSummary summary;
  summary.method = cfg.method;
  summary.holdout = cfg.holdout;
  std::vector<MetricsRecord> ind, ood;
  for (auto seed : cfg.seeds) {
    summary.seeds.push_back(run_seed(cfg, data, seed));
    ind.push_back(summary.seeds.back().ind);
    ood.push_back(summary.seeds.back().ood);
  }
  summary.mean_ind = average_metrics(ind);
  summary.mean_ood = average_metrics(ood);
  return summary;
}

namespace {

json metrics_json(const MetricsRecord& m) {
  json conf = json::array();
  for (const auto& row : m.confusion) conf.push_back(row);
  return {{"sp", m.specificity}, {"se", m.sensitivity}, {"score", m.score}, {"confusion", conf}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

void write_experiment(const ExperimentConfig& cfg, const ExperimentSummary& summary) {
  std::filesystem::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "config.json", config_to_json(cfg) + "\n");

  json j;
  j["method"] = std::string(to_string(summary.method));
  j["holdout"] = summary.holdout;
  json seeds = json::array();
  for (const auto& s : summary.seeds) {
    const auto tag = "seed" + std::to_string(s.seed);
    std::string lines;
    for (const auto& r : s.rounds) lines += to_json_line(r) + "\n";
    write_text(cfg.output_dir / ("rounds_" + tag + ".jsonl"), lines);
    save_checkpoint(cfg.output_dir / ("model_" + tag + ".ckpt"), s.model);

    json sj;
    sj["seed"] = s.seed;
    sj["ind"] = metrics_json(s.ind);
    sj["ood"] = metrics_json(s.ood);
    json per = json::object();
    for (const auto& [dev, m] : s.per_device) per[dev] = metrics_json(m);
    sj["per_device"] = per;
    sj["holdout_reads_during_training"] = s.holdout_reads_during_training;
    seeds.push_back(sj);
  }
  j["seeds"] = seeds;
  j["mean_ind"] = metrics_json(summary.mean_ind);
  j["mean_ood"] = metrics_json(summary.mean_ood);
  write_text(cfg.output_dir / "summary.json", j.dump(2) + "\n");
}

EmbeddingSet collect_embeddings(const FlatModel& m, const LoadedData& data,
                                const ProbeOptions& opts) {
  EmbeddingSet e;
  e.dim = m.spec.hidden;
  for (const auto& [device, indices] : data.by_device) {
    std::vector<std::size_t> chosen(indices.begin(), indices.end());
    if (opts.test_split_only) {
      chosen = split_device(indices, opts.test_fraction, opts.split_seed, device).test;
    }
    for (auto i : chosen) {
      const auto& r = (*data.records)[i];
      const auto v = embed_audio(m, r.grid);
      e.data.insert(e.data.end(), v.begin(), v.end());
      e.device.push_back(r.device);
      e.disease.push_back(r.label);
    }
  }
  return e;
}

ProbeReport run_probe(const EmbeddingSet& embeddings, const ProbeOptions& opts) {
  embeddings.validate();
  bool all_same = true;
  const auto first = embeddings.row(0);
  for (std::size_t i = 1; i < embeddings.size() && all_same; ++i) {
    all_same = std::equal(first.begin(), first.end(), embeddings.row(i).begin());
  }
  if (all_same) {
    raise(ErrorKind::DegenerateEmbedding, "all embeddings coincide; neighbours are undefined");
  }
  const auto dev = device_labels(embeddings);
  const auto dis = disease_labels(embeddings);
  const auto mean = background_mean_subtract(embeddings);
  const auto white = lowrank_whiten(embeddings, opts.whiten_rank);

  ProbeReport r;
  r.device_raw = knn_accuracy(embeddings, dev, opts.k);
  r.disease_raw = knn_accuracy(embeddings, dis, opts.k);
  r.device_mean = knn_accuracy(mean, dev, opts.k);
  r.disease_mean = knn_accuracy(mean, dis, opts.k);
  r.device_whitened = knn_accuracy(white, dev, opts.k);
  r.disease_whitened = knn_accuracy(white, dis, opts.k);
  r.raw = embeddings;
  return r;
}

std::string format_probe_report(const ProbeReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "variant" << std::right << std::setw(12) << "device_acc"
      << std::setw(13) << "disease_acc" << '\n';
  auto row = [&](const char* name, double d, double s) {
    out << std::left << std::setw(10) << name << std::right << std::setw(12) << format_2dp(d)
        << std::setw(13) << format_2dp(s) << '\n';
  };
  row("raw", r.device_raw, r.disease_raw);
  row("mean", r.device_mean, r.disease_mean);
  row("whiten", r.device_whitened, r.disease_whitened);
  return out.str();
}

std::string format_report(const std::filesystem::path& runs_dir) {
  if (!std::filesystem::is_directory(runs_dir)) {
    raise(ErrorKind::Io, "runs directory " + runs_dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> summaries;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(runs_dir)) {
    if (entry.path().filename() == "summary.json") summaries.push_back(entry.path());
  }
  std::sort(summaries.begin(), summaries.end());
  if (summaries.empty()) raise(ErrorKind::Io, "no summary.json under " + runs_dir.string());

  std::ostringstream out;
  out << std::left << std::setw(28) << "run" << std::setw(10) << "method" << std::setw(20)
      << "holdout" << std::right << std::setw(8) << "IND Sp" << std::setw(8) << "IND Se"
      << std::setw(10) << "IND Score" << std::setw(8) << "OOD Sp" << std::setw(8) << "OOD Se"
      << std::setw(10) << "OOD Score" << '\n';
  for (const auto& path : summaries) {
    std::ifstream in(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      raise(ErrorKind::Format, path.string() + ": " + e.what());
    }
    std::string holdout;
    for (const auto& h : j.at("holdout")) {
      if (!holdout.empty()) holdout += '+';
      holdout += h.get<std::string>();
    }
    auto rel = std::filesystem::relative(path.parent_path(), runs_dir).string();
    if (rel == ".") rel = path.parent_path().filename().string();
    const auto& ind = j.at("mean_ind");
    const auto& ood = j.at("mean_ood");
    out << std::left << std::setw(28) << rel << std::setw(10) << j.at("method").get<std::string>()
        << std::setw(20) << holdout << std::right;
    for (const auto* m : {&ind, &ood}) {
      out << std::setw(8) << format_2dp(m->at("sp").get<double>()) << std::setw(8)
          << format_2dp(m->at("se").get<double>()) << std::setw(10)
          << format_2dp(m->at("score").get<double>());
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace stethofed
