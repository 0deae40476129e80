#include "stethofed/fed_sim.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include <nlohmann/json.hpp>

#include "stethofed/error.hpp"

namespace stethofed {

ClientShard::ClientShard(std::string client_id, std::string device_id,
                         std::shared_ptr<const std::vector<Record>> records,
                         std::vector<std::size_t> indices)
    : client_id_(std::move(client_id)),
      device_id_(std::move(device_id)),
      records_(std::move(records)),
      indices_(std::move(indices)),
      reads_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (indices_.empty()) raise(ErrorKind::EmptyClient, "client " + client_id_ + " has no samples");
  for (auto i : indices_) {
    if (i >= records_->size()) raise(ErrorKind::ShapeMismatch, "shard index out of range");
    if ((*records_)[i].device != device_id_) {
      raise(ErrorKind::Config, "client " + client_id_ + " mixes devices " + device_id_ + " and " +
                                   (*records_)[i].device);
    }
  }
}

const Record& ClientShard::read(std::size_t i) const {
  reads_->fetch_add(1, std::memory_order_relaxed);
  return (*records_)[indices_.at(i)];
}

std::string_view to_string(Optimizer o) {
  return o == Optimizer::Adam ? "adam" : "sgd";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "sgd") return Optimizer::Sgd;
  raise(ErrorKind::Config, "unknown optimizer '" + std::string(name) + "' (expected adam or sgd)");
}

void FedConfig::validate() const {
  if (rounds < 1) raise(ErrorKind::Config, "rounds must be >= 1");
  if (local_epochs < 1) raise(ErrorKind::Config, "local_epochs must be >= 1");
  if (!(lr > 0.0)) raise(ErrorKind::Config, "lr must be positive");
  if (!(lambda >= 0.0)) raise(ErrorKind::Config, "lambda must be >= 0");
  if (t_aug < 0 || t_w < 0) raise(ErrorKind::Config, "t_aug and t_w must be >= 0");
  if (batch_size == 0) raise(ErrorKind::Config, "batch_size must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0)) {
    raise(ErrorKind::Config, "participation must lie in (0, 1]");
  }
  if (!(hvp_delta > 0.0)) raise(ErrorKind::Config, "hvp_delta must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    raise(ErrorKind::Config, "adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) raise(ErrorKind::Config, "adam_eps must be positive");
}

ParamVector fedavg_aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) raise(ErrorKind::EmptyUpdateSet, "no client updates to aggregate");
  std::size_t total = 0;
  for (const auto& u : updates) {
    require_compatible(u.params, updates.front().params);
    total += u.num_samples;
  }
  if (total == 0) raise(ErrorKind::EmptyUpdateSet, "client updates carry zero samples");
  ParamVector out(updates.front().params.registry_ptr());
  for (const auto& u : updates) {
    const double w = static_cast<double>(u.num_samples) / static_cast<double>(total);
    axpy_inplace(w, u.params, out);
  }
  return out;
}

double align_penalty(const ParamVector& g_k, const ParamVector& g_bar) {
  require_compatible(g_k, g_bar);
  double s = 0.0;
  for (std::size_t i = 0; i < g_k.size(); ++i) {
    const double d = g_k[i] - g_bar[i];
    s += d * d;
  }
  return s / static_cast<double>(g_k.size());
}

namespace {

SampleView view_of(const Record& r) { return {&r.grid, r.prompt, one_hot(r.label)}; }

}  // namespace

ParamVector reference_gradient(const FlatModel& global, std::span<const ClientShard* const> clients,
                               const RngStream& stream) {
  if (clients.empty()) raise(ErrorKind::EmptyUpdateSet, "reference gradient needs clients");
  ParamVector sum(global.params.registry_ptr());
  for (const ClientShard* c : clients) {
    if (c->size() == 0) raise(ErrorKind::EmptyClient, "client " + c->client_id() + " is empty");
    auto pick = stream.child(c->client_id());
    const auto& rec = c->read(static_cast<std::size_t>(pick.below(c->size())));
    const std::array<SampleView, 1> one{view_of(rec)};
    axpy_inplace(1.0, loss_and_grad(global, one).grad, sum);
  }
  return (1.0 / static_cast<double>(clients.size())) * sum;
}

AugmentedBatch augment_batch(std::span<const SampleView> raw, const ModelSpec& spec,
                             const TrainingSetup& setup, const RngStream& batch_stream) {
  const auto& recipe = setup.recipe;
  std::vector<SpecGrid> norm;
  norm.reserve(raw.size());
  for (const auto& v : raw) norm.push_back(normalize_input(spec, *v.grid));
  AugmentedBatch out;
  out.grids.reserve(raw.size());
  out.views.reserve(raw.size());
  std::vector<LabelDist> targets;
  targets.reserve(raw.size());

  switch (recipe.augment) {
    case AugmentKind::Gin: {
      auto ks = batch_stream.child("gin-kernels");
      const GinKernels& kernels = out.kernels.emplace(sample_kernels(ks, setup.gin));
      for (std::size_t i = 0; i < raw.size(); ++i) {
        auto s = batch_stream.child("gin").child(i);
        out.grids.push_back(gin_augment(norm[i], s, kernels, setup.gin));
        targets.push_back(raw[i].target);
      }
      break;
    }
    case AugmentKind::Gain: {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        auto s = batch_stream.child("gain").child(i);
        out.grids.push_back(gain_intervene(norm[i], s, setup.gin).first);
        targets.push_back(raw[i].target);
      }
      break;
    }
    case AugmentKind::SpecMask: {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        auto s = batch_stream.child("mask").child(i);
        out.grids.push_back(spec_mask(norm[i], s, recipe.mask_max_f, recipe.mask_max_t));
        targets.push_back(raw[i].target);
      }
      break;
    }
    case AugmentKind::Mixup: {
      auto s = batch_stream.child("mixup");
      const double lam = beta(s, recipe.mixup_alpha, recipe.mixup_alpha);
      const auto partner = permutation(s, raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& other = raw[partner[i]];
        const auto& other_grid = norm[partner[i]];
        auto mixed = mixup(norm[i], other_grid, raw[i].target, other.target, lam);
        out.grids.push_back(std::move(mixed.grid));
        targets.push_back(mixed.target);
      }
      break;
    }
    case AugmentKind::None:
      break;
  }

  for (auto& g : out.grids) g = denormalize_input(spec, g);
  for (std::size_t i = 0; i < out.grids.size(); ++i) {
    MetaPrompt prompt = raw[i].prompt;
    if (recipe.counterfactual_text) {
      auto s = batch_stream.child("text").child(i);
      prompt = neutralize(prompt, s, setup.text);
    }
    out.views.push_back({&out.grids[i], prompt, targets[i]});
  }
  return out;
}


LocalResult local_update(const ClientShard& client, const FlatModel& global,
                         const ParamVector* g_bar, int round, const TrainingSetup& setup,
                         const RngStream& stream) {
  if (round < 1) raise(ErrorKind::BadRange, "rounds are numbered from 1");
  if (client.size() == 0) raise(ErrorKind::EmptyClient, "client " + client.client_id());
  const auto& cfg = setup.fed;
  const bool aug_on = setup.recipe.augment != AugmentKind::None && round > cfg.t_aug;
  const bool align_on = setup.recipe.gradient_alignment && round > cfg.t_w;
  if (align_on && g_bar == nullptr) {
    raise(ErrorKind::Config, "alignment is active but no reference gradient was provided");
  }

  FlatModel local = global;
  std::vector<double> m1, m2;
  std::uint64_t steps = 0;
  if (cfg.optimizer == Optimizer::Adam) {
    m1.assign(local.params.size(), 0.0);
    m2.assign(local.params.size(), 0.0);
  }
  const double inv_p = 1.0 / static_cast<double>(local.params.size());
  LocalResult result;

  std::vector<SampleView> raw;
  raw.reserve(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    const auto epoch_stream = stream.child("epoch").child(static_cast<std::uint64_t>(epoch));
    auto shuffle = epoch_stream.child("shuffle");
    const auto order = permutation(shuffle, client.size());
    const std::size_t num_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;

    for (std::size_t b = 0; b < num_batches; ++b) {
      const auto batch_stream = epoch_stream.child("batch").child(b);
      raw.clear();
      const std::size_t end = std::min(order.size(), (b + 1) * cfg.batch_size);
      for (std::size_t i = b * cfg.batch_size; i < end; ++i) {
        raw.push_back(view_of(client.read(order[i])));
      }

      BatchLoss rec;
      LossGrad step = loss_and_grad(local, raw);
      rec.non_aug = step.loss;

      if (aug_on) {
        const auto aug = augment_batch(raw, local.spec, setup, batch_stream);
        const LossGrad aug_lg = loss_and_grad(local, aug.views);
        rec.aug = aug_lg.loss;
        axpy_inplace(1.0, aug_lg.grad, step.grad);
      }

      if (align_on) {
        auto pick = batch_stream.child("align");
        const auto j = static_cast<std::size_t>(pick.below(raw.size()));
        const std::array<SampleView, 1> one{raw[j]};
        const ParamVector g_k = loss_and_grad(local, one).grad;
        rec.r_align = align_penalty(g_k, *g_bar);
        if (cfg.lambda != 0.0) {
          // d/dtheta of lambda/P * |g_k - g_bar|^2 with g_bar held fixed.
          const ParamVector h = hvp(local, raw[j], g_k - *g_bar, cfg.hvp_delta);
          axpy_inplace(cfg.lambda * 2.0 * inv_p, h, step.grad);
        }
      }

      if (cfg.optimizer == Optimizer::Adam) {
        ++steps;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(steps));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(steps));
        auto theta = local.params.values();
        const auto g = step.grad.values();
        for (std::size_t i = 0; i < theta.size(); ++i) {
          m1[i] = cfg.adam_beta1 * m1[i] + (1.0 - cfg.adam_beta1) * g[i];
          m2[i] = cfg.adam_beta2 * m2[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
          theta[i] -= cfg.lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + cfg.adam_eps);
        }
      } else {
        axpy_inplace(-cfg.lr, step.grad, local.params);
      }
      result.batches.push_back(rec);
    }
  }
  for (double v : local.params.values()) {
    if (!std::isfinite(v)) {
      raise(ErrorKind::NonFinite, "client " + client.client_id() + " diverged in round " +
                                      std::to_string(round));
    }
  }
  result.params = std::move(local.params);
  return result;
}

namespace {

ClientRoundSummary summarize(const ClientShard& c, const LocalResult& r) {
  ClientRoundSummary s;
  s.client_id = c.client_id();
  s.num_samples = c.size();
  const double n = static_cast<double>(r.batches.size());
  double aug = 0.0, align = 0.0;
  bool has_aug = false, has_align = false;
  for (const auto& b : r.batches) {
    s.loss_non_aug += b.non_aug;
    if (b.aug) {
      aug += *b.aug;
      has_aug = true;
    }
    if (b.r_align) {
      align += *b.r_align;
      has_align = true;
    }
  }
  s.loss_non_aug /= n;
  if (has_aug) s.loss_aug = aug / n;
  if (has_align) s.r_align = align / n;
  return s;
}

}  // namespace

RoundReport run_round(FederationState& state, int round, const TrainingSetup& setup,
                      const RngStream& run_stream, const Evaluator& evaluate) {
  const auto& cfg = setup.fed;
  if (state.clients.empty()) raise(ErrorKind::EmptyUpdateSet, "federation has no clients");
  const auto round_stream = run_stream.child("round").child(static_cast<std::uint64_t>(round));

  std::vector<const ClientShard*> participants;
  if (cfg.participation >= 1.0) {
    for (const auto& c : state.clients) participants.push_back(&c);
  } else {
    auto pick = round_stream.child("participation");
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.participation *
                                              static_cast<double>(state.clients.size()))));
    auto order = permutation(pick, state.clients.size());
    order.resize(k);
    std::sort(order.begin(), order.end());
    for (auto i : order) participants.push_back(&state.clients[i]);
  }

  RoundReport report;
  report.round = round;
  const auto P = static_cast<std::uint64_t>(state.global.params.size());
  const auto K = static_cast<std::uint64_t>(participants.size());
  report.comm.params_down = P * K;

  std::optional<ParamVector> g_bar;
  if (setup.recipe.gradient_alignment && round > cfg.t_w) {
    g_bar = reference_gradient(state.global, participants, round_stream.child("reference"));
    report.comm.grads_up = P * K;
    report.comm.grads_down = P * K;
  }

  std::vector<std::optional<LocalResult>> results(participants.size());
  std::vector<std::exception_ptr> errors(participants.size());
  auto work = [&](std::size_t i) {
    try {
      const auto stream = round_stream.child("client").child(participants[i]->client_id());
      results[i] = local_update(*participants[i], state.global, g_bar ? &*g_bar : nullptr, round,
                                setup, stream);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (cfg.parallel_clients && participants.size() > 1) {
    std::vector<std::jthread> workers;
    workers.reserve(participants.size());
    for (std::size_t i = 0; i < participants.size(); ++i) workers.emplace_back(work, i);
  } else {
    for (std::size_t i = 0; i < participants.size(); ++i) work(i);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<ClientUpdate> updates;
  updates.reserve(participants.size());
  for (std::size_t i = 0; i < participants.size(); ++i) {
    report.clients.push_back(summarize(*participants[i], *results[i]));
    updates.push_back({std::move(results[i]->params), participants[i]->size()});
  }
  report.comm.params_up = P * K;
  state.global.params = fedavg_aggregate(updates);
  if (evaluate) report.eval = evaluate(state.global);
  return report;
}

std::string to_json_line(const RoundReport& report) {
  nlohmann::ordered_json j;
  j["round"] = report.round;
  auto clients = nlohmann::ordered_json::array();
  for (const auto& c : report.clients) {
    nlohmann::ordered_json cj;
    cj["client"] = c.client_id;
    cj["n"] = c.num_samples;
    cj["loss_non_aug"] = c.loss_non_aug;
    cj["loss_aug"] = c.loss_aug ? nlohmann::ordered_json(*c.loss_aug) : nlohmann::ordered_json(nullptr);
    cj["r_align"] = c.r_align ? nlohmann::ordered_json(*c.r_align) : nlohmann::ordered_json(nullptr);
    clients.push_back(std::move(cj));
  }
  j["clients"] = std::move(clients);
  if (report.eval) {
    j["eval"] = {{"sp", report.eval->specificity},
                 {"se", report.eval->sensitivity},
                 {"score", report.eval->score}};
  } else {
    j["eval"] = nullptr;
  }
  j["comm"] = {{"params_down", report.comm.params_down},
               {"params_up", report.comm.params_up},
               {"grads_up", report.comm.grads_up},
               {"grads_down", report.comm.grads_down}};
  return j.dump();
}

}  // namespace stethofed
