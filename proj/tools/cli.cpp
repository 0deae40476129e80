#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "stethofed/checkpoint.hpp"
#include "stethofed/data_synth.hpp"
#include "stethofed/dataset_io.hpp"
#include "stethofed/error.hpp"
#include "stethofed/experiment.hpp"
#include "stethofed/probe.hpp"

namespace stethofed::cli {
namespace {

namespace fs = std::filesystem;

struct GenOptions {
  std::string preset = "table1";
  std::string out;
  std::size_t count = 2000;
  std::vector<std::string> devices;
  std::uint64_t seed = GenerationSpec{}.seed;
  std::uint64_t style_seed = kDefaultStyleSeed;
  std::size_t freq_bins = 64;
  std::size_t time_frames = 128;
  double site_label_correlation = 0.0;
};

// Flag values that override the config file when given.
struct TrainOptions {
  std::string config;
  std::optional<std::string> method;
  std::vector<std::string> holdout;
  std::optional<std::string> data_dir;
  std::optional<std::string> output;
  std::optional<int> rounds;
  std::optional<int> local_epochs;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::optional<double> lambda;
  std::optional<int> t_aug;
  std::optional<int> t_w;
  std::optional<std::size_t> batch_size;
  std::optional<double> p_text;
  std::optional<double> alpha_min;
  std::optional<double> g_min;
  std::optional<double> g_max;
  std::optional<double> input_shift;
  std::optional<double> input_scale;
  std::optional<bool> center_input;
  std::vector<std::uint64_t> seeds;
  bool parallel_clients = false;
};

struct ProbeCliOptions {
  std::string checkpoint;
  std::string data;
  std::optional<std::uint64_t> zero_shot_seed;
  std::string embeddings;
  std::string export_path;
  std::size_t k = 50;
  std::size_t whiten_rank = 2;
  bool all_records = false;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 7;
};

int exit_code_for(ErrorKind kind) {
  switch (error_category(kind)) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Numeric: return kExitNumeric;
    case ErrorCategory::Internal: return kExitInternal;
  }
  return kExitInternal;
}

void run_gen(const GenOptions& o, std::ostream& out) {
  if (o.preset != "table1") {
    raise(ErrorKind::Config, "unknown preset '" + o.preset + "' (only 'table1' is built in)");
  }
  if (o.count == 0) raise(ErrorKind::Config, "--count must be >= 1");
  const auto presets = table1_presets();
  std::vector<std::string> devices = o.devices;
  if (devices.empty()) {
    for (const auto& p : presets) devices.push_back(p.device_id);
  }
  fs::create_directories(o.out);
  for (const auto& id : devices) {
    GenerationSpec spec;
    spec.freq_bins = o.freq_bins;
    spec.time_frames = o.time_frames;
    spec.seed = o.seed;
    spec.style_seed = o.style_seed;
    spec.site_label_correlation = o.site_label_correlation;
    spec.devices.push_back({find_preset(presets, id), o.count});
    const auto ds = generate_dataset(spec);
    write_dataset(o.out, id, ds);
    out << "wrote " << (fs::path(o.out) / (id + ".manifest")).string() << " (" << ds.records.size()
        << " records)\n";
  }
}

void run_train(const TrainOptions& o, std::ostream& out) {
  ExperimentConfig cfg = load_config(o.config);
  if (const char* env = std::getenv(kRunDirEnv); env != nullptr && *env != '\0') {
    cfg.output_dir = env;
  }
  if (o.output) cfg.output_dir = *o.output;
  if (o.method) cfg.method = parse_method(*o.method);
  if (!o.holdout.empty()) cfg.holdout = o.holdout;
  if (o.data_dir) {
    cfg.data_dir = *o.data_dir;
    cfg.datasets.clear();
  }
  if (o.rounds) cfg.fed.rounds = *o.rounds;
  if (o.local_epochs) cfg.fed.local_epochs = *o.local_epochs;
  if (o.lr) cfg.fed.lr = *o.lr;
  if (o.optimizer) cfg.fed.optimizer = parse_optimizer(*o.optimizer);
  if (o.lambda) cfg.fed.lambda = *o.lambda;
  if (o.t_aug) cfg.fed.t_aug = *o.t_aug;
  if (o.t_w) cfg.fed.t_w = *o.t_w;
  if (o.batch_size) cfg.fed.batch_size = *o.batch_size;
  if (o.p_text) cfg.text.p_text = *o.p_text;
  if (o.alpha_min) cfg.gin.alpha_min = *o.alpha_min;
  if (o.g_min) cfg.gin.g_min = *o.g_min;
  if (o.g_max) cfg.gin.g_max = *o.g_max;
  if (o.input_shift) cfg.input_shift = *o.input_shift;
  if (o.input_scale) cfg.input_scale = *o.input_scale;
  if (o.center_input) cfg.center_input = *o.center_input;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.parallel_clients) cfg.fed.parallel_clients = true;
  cfg.validate();

  const auto data = load_data(cfg);
  const auto summary = run_experiment(cfg, data);
  write_experiment(cfg, summary);
  for (const auto& s : summary.seeds) {
    out << "seed " << s.seed << ": IND score " << format_2dp(s.ind.score) << ", OOD score "
        << format_2dp(s.ood.score) << '\n';
  }
  out << "mean: IND " << format_2dp(summary.mean_ind.specificity) << '/'
      << format_2dp(summary.mean_ind.sensitivity) << '/' << format_2dp(summary.mean_ind.score)
      << ", OOD " << format_2dp(summary.mean_ood.specificity) << '/'
      << format_2dp(summary.mean_ood.sensitivity) << '/' << format_2dp(summary.mean_ood.score)
      << " (S_p/S_e/Score)\n";
  out << "results in " << cfg.output_dir.string() << '\n';
}

void run_probe_cmd(const ProbeCliOptions& o, std::ostream& out) {
  ProbeOptions opts;
  opts.k = o.k;
  opts.whiten_rank = o.whiten_rank;
  opts.test_split_only = !o.all_records;
  opts.test_fraction = o.test_fraction;
  opts.split_seed = o.split_seed;

  EmbeddingSet set;
  if (!o.embeddings.empty()) {
    std::ifstream in(o.embeddings);
    if (!in) raise(ErrorKind::Io, "cannot open " + o.embeddings);
    set = read_embeddings_tsv(in);
  } else {
    if (o.data.empty() || o.checkpoint.empty() == !o.zero_shot_seed) {
      raise(ErrorKind::Config,
            "probe needs --data with exactly one of --checkpoint or --zero-shot, or --embeddings");
    }
    ExperimentConfig cfg;
    cfg.data_dir = o.data;
    const auto data = load_data(cfg);
    const auto model = o.zero_shot_seed ? zero_shot_encoder(cfg, data, *o.zero_shot_seed)
                                        : load_checkpoint(o.checkpoint);
    set = collect_embeddings(model, data, opts);
  }
  const auto report = run_probe(set, opts);
  out << format_probe_report(report);
  if (!o.export_path.empty()) {
    std::ofstream f(o.export_path);
    if (!f) raise(ErrorKind::Io, "cannot write " + o.export_path);
    write_embeddings_tsv(f, report.raw);
    out << "embeddings written to " << o.export_path << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated respiratory-sound simulator with leave-one-device-out training"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate the synthetic multi-device benchmark");
  gen_cmd->add_option("--preset", gen.preset, "Device preset table")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Records per device")->capture_default_str();
  gen_cmd->add_option("--devices", gen.devices, "Subset of preset device ids");
  gen_cmd->add_option("--seed", gen.seed, "Content seed")->capture_default_str();
  gen_cmd->add_option("--style-seed", gen.style_seed, "Device style seed")->capture_default_str();
  gen_cmd->add_option("--freq-bins", gen.freq_bins, "Frequency bins")->capture_default_str();
  gen_cmd->add_option("--time-frames", gen.time_frames, "Time frames")->capture_default_str();
  gen_cmd->add_option("--site-label-correlation", gen.site_label_correlation,
                      "Probability that the site token follows the label")
      ->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Run leave-one-device-out federated training");
  train_cmd->add_option("--config", train.config, "JSON experiment config")->required();
  train_cmd->add_option("--method", train.method, "fedavg, gain, specmask, mixup or btscafe");
  train_cmd->add_option("--holdout", train.holdout, "Held-out device id (repeatable)");
  train_cmd->add_option("--data-dir", train.data_dir, "Directory of <device>.manifest files");
  train_cmd->add_option("--output", train.output, "Output directory");
  train_cmd->add_option("--rounds", train.rounds, "Communication rounds");
  train_cmd->add_option("--local-epochs", train.local_epochs, "Local epochs per round");
  train_cmd->add_option("--lr", train.lr, "Local learning rate");
  train_cmd->add_option("--optimizer", train.optimizer, "adam or sgd");
  train_cmd->add_option("--lambda", train.lambda, "Gradient alignment weight");
  train_cmd->add_option("--t-aug", train.t_aug, "Last round without augmentation");
  train_cmd->add_option("--t-w", train.t_w, "Last round without alignment");
  train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size");
  train_cmd->add_option("--p-text", train.p_text, "Per-attribute neutralization probability");
  train_cmd->add_option("--alpha-min", train.alpha_min, "Lower clip for the mixing weight");
  train_cmd->add_option("--g-min", train.g_min, "Lower gain bound");
  train_cmd->add_option("--g-max", train.g_max, "Upper gain bound");
  train_cmd->add_option("--input-shift", train.input_shift, "Fixed input normalization shift");
  train_cmd->add_option("--input-scale", train.input_scale, "Fixed input normalization scale");
  train_cmd->add_option("--center-input", train.center_input,
                        "Subtract each sample's pooled mean instead of the fixed shift");
  train_cmd->add_option("--seeds", train.seeds, "Training seeds");
  train_cmd->add_flag("--parallel-clients", train.parallel_clients,
                      "Run local updates on worker threads");

  ProbeCliOptions probe;
  auto* probe_cmd = app.add_subcommand("probe", "kNN probe of audio embeddings");
  probe_cmd->add_option("--checkpoint", probe.checkpoint, "Model checkpoint");
  probe_cmd->add_option("--data", probe.data, "Directory of <device>.manifest files");
  probe_cmd->add_option("--zero-shot", probe.zero_shot_seed,
                        "Probe the untrained encoder initialized from this seed");
  probe_cmd->add_option("--embeddings", probe.embeddings, "Read embeddings from a TSV file instead");
  probe_cmd->add_option("--export", probe.export_path, "Write the raw embeddings as TSV");
  probe_cmd->add_option("--k", probe.k, "Neighbours")->capture_default_str();
  probe_cmd->add_option("--whiten-rank", probe.whiten_rank, "Directions removed by whitening")
      ->capture_default_str();
  probe_cmd->add_flag("--all-records", probe.all_records, "Probe every record, not only test splits");
  probe_cmd->add_option("--test-fraction", probe.test_fraction)->capture_default_str();
  probe_cmd->add_option("--split-seed", probe.split_seed)->capture_default_str();

  std::string runs_dir;
  auto* report_cmd = app.add_subcommand("report", "Tabulate S_p, S_e and Score of finished runs");
  report_cmd->add_option("--runs", runs_dir, "Directory searched for summary.json")->required();

  std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) {
      err << app.get_subcommands().front()->help();
    }
    return kExitConfig;
  }

  try {
    if (*gen_cmd) run_gen(gen, out);
    if (*train_cmd) run_train(train, out);
    if (*probe_cmd) run_probe_cmd(probe, out);
    if (*report_cmd) out << format_report(runs_dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [io]: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace stethofed::cli
