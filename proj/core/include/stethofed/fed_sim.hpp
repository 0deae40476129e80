#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stethofed/augment.hpp"
#include "stethofed/metrics.hpp"
#include "stethofed/model.hpp"
#include "stethofed/record.hpp"
#include "stethofed/rng.hpp"
#include "stethofed/text_meta.hpp"

namespace stethofed {

// A client's local dataset: a view onto shared records, restricted to one
// device. Every read goes through read(), which bumps an access counter so
// that held-out shards can be audited.
class ClientShard {
 public:
  ClientShard(std::string client_id, std::string device_id,
              std::shared_ptr<const std::vector<Record>> records, std::vector<std::size_t> indices);

  const std::string& client_id() const noexcept { return client_id_; }
  const std::string& device_id() const noexcept { return device_id_; }
  std::size_t size() const noexcept { return indices_.size(); }

  const Record& read(std::size_t i) const;
  std::uint64_t reads() const noexcept { return reads_->load(); }
  void reset_reads() const noexcept { reads_->store(0); }

 private:
  std::string client_id_;
  std::string device_id_;
  std::shared_ptr<const std::vector<Record>> records_;
  std::vector<std::size_t> indices_;
  std::shared_ptr<std::atomic<std::uint64_t>> reads_;
};

// Local step rule. Adam state lives for one local update and restarts every
// round; Sgd is plain gradient descent.
enum class Optimizer { Adam, Sgd };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

struct FedConfig {
  int rounds = 30;
  int local_epochs = 1;
  double lr = 2e-3;
  double lambda = 1e-3;
  int t_aug = 5;
  int t_w = 5;
  std::size_t batch_size = 16;
  double participation = 1.0;
  double hvp_delta = 1e-4;
  bool parallel_clients = false;
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

enum class AugmentKind { None, Gain, SpecMask, Mixup, Gin };

// Which terms of the local objective a method switches on.
struct LocalRecipe {
  AugmentKind augment = AugmentKind::None;
  bool counterfactual_text = false;
  bool gradient_alignment = false;
  std::size_t mask_max_f = 8;
  std::size_t mask_max_t = 16;
  double mixup_alpha = 0.2;
};

struct ClientUpdate {
  ParamVector params;
  std::size_t num_samples = 0;
};

// Sample-count weighted mean of client parameters.
ParamVector fedavg_aggregate(std::span<const ClientUpdate> updates);

// (1/P) * ||g_k - g_bar||^2
double align_penalty(const ParamVector& g_k, const ParamVector& g_bar);

// Each client contributes the gradient of one uniformly drawn, non-augmented
// sample at the global parameters; the result is their plain mean.
ParamVector reference_gradient(const FlatModel& global, std::span<const ClientShard* const> clients,
                               const RngStream& stream);

struct BatchLoss {
  double non_aug = 0.0;
  std::optional<double> aug;
  std::optional<double> r_align;
};

struct LocalResult {
  ParamVector params;
  std::vector<BatchLoss> batches;
};

struct TrainingSetup {
  FedConfig fed;
  LocalRecipe recipe;
  GinConfig gin;
  TextAugConfig text;
};

// Augmented copy of one mini-batch. Views point into grids, so the batch is
// move-only. kernels holds the GIN draw shared by every sample of the batch.
struct AugmentedBatch {
  AugmentedBatch() = default;
  AugmentedBatch(AugmentedBatch&&) = default;
  AugmentedBatch& operator=(AugmentedBatch&&) = default;
  AugmentedBatch(const AugmentedBatch&) = delete;
  AugmentedBatch& operator=(const AugmentedBatch&) = delete;

  std::vector<SpecGrid> grids;
  std::vector<SampleView> views;
  std::optional<GinKernels> kernels;
};

// Applies the recipe's augmentation in the fixed-normalized domain of spec.
// Stream layout under batch_stream: "gin-kernels", "gin"/i, "gain"/i,
// "mask"/i, "mixup", "text"/i.
AugmentedBatch augment_batch(std::span<const SampleView> raw, const ModelSpec& spec,
                             const TrainingSetup& setup, const RngStream& batch_stream);

LocalResult local_update(const ClientShard& client, const FlatModel& global,
                         const ParamVector* g_bar, int round, const TrainingSetup& setup,
                         const RngStream& stream);

struct ClientRoundSummary {
  std::string client_id;
  std::size_t num_samples = 0;
  double loss_non_aug = 0.0;
  std::optional<double> loss_aug;
  std::optional<double> r_align;
};

// Scalars exchanged in a round (multiply by 8 for bytes).
struct CommLog {
  std::uint64_t params_down = 0;
  std::uint64_t params_up = 0;
  std::uint64_t grads_up = 0;
  std::uint64_t grads_down = 0;
};

struct RoundReport {
  int round = 0;
  std::vector<ClientRoundSummary> clients;
  std::optional<MetricsRecord> eval;
  CommLog comm;
};

std::string to_json_line(const RoundReport& report);

struct FederationState {
  FlatModel global;
  std::vector<ClientShard> clients;
};

using Evaluator = std::function<MetricsRecord(const FlatModel&)>;

// One communication round: broadcast, optional reference gradient, local
// updates (parallel or sequential, identical results), aggregation.
RoundReport run_round(FederationState& state, int round, const TrainingSetup& setup,
                      const RngStream& run_stream, const Evaluator& evaluate = {});

}  // namespace stethofed
