#include "stethofed/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stethofed/error.hpp"

namespace stethofed {
namespace {

// Raw pointers into one parameter vector, resolved once per call.
template <typename T>
struct Blocks {
  T* w1;
  T* b1;
  T* w2;
  T* b2;
  T* emb;
  T* wt;
  T* bt;
  T* wf;
  T* bf;
};

template <typename Span, typename T = std::remove_reference_t<decltype(*std::declval<Span>().data())>>
Blocks<T> resolve(const Registry& reg, Span values) {
  auto at = [&](std::string_view name) { return values.data() + reg.at(name).offset; };
  return {at("audio1.weight"), at("audio1.bias"), at("audio2.weight"),  at("audio2.bias"),
          at("embedding.table"), at("text.weight"), at("text.bias"),   at("fusion.weight"),
          at("fusion.bias")};
}

// y = W x + b with W row-major (rows x cols).
void affine(const double* w, const double* b, const double* x, std::size_t rows, std::size_t cols,
            double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

struct Activations {
  std::vector<double> pooled;
  std::vector<double> pre1;
  std::vector<double> h1;
  std::vector<double> audio;
  std::vector<double> t_vec;
  std::vector<double> text;
  std::vector<double> fused;
  Logits logits{};
};

void check_grid(const ModelSpec& spec, const SpecGrid& x) {
  if (x.freq_bins() != spec.freq_bins || x.time_frames() != spec.time_frames) {
    raise(ErrorKind::ShapeMismatch, "grid is " + std::to_string(x.freq_bins()) + "x" +
                                        std::to_string(x.time_frames()) + ", model expects " +
                                        std::to_string(spec.freq_bins) + "x" +
                                        std::to_string(spec.time_frames));
  }
}

void run_audio(const ModelSpec& spec, const Blocks<const double>& p, const SpecGrid& x,
               Activations& act) {
  const auto H = spec.hidden;
  act.pooled = pool_grid(spec, x);
  double c = spec.input_shift;
  if (spec.center_input) {
    c = std::accumulate(act.pooled.begin(), act.pooled.end(), 0.0) /
        static_cast<double>(act.pooled.size());
  }
  for (auto& v : act.pooled) v = (v - c) / spec.input_scale;
  act.pre1.resize(H);
  act.h1.resize(H);
  act.audio.resize(H);
  affine(p.w1, p.b1, act.pooled.data(), H, act.pooled.size(), act.pre1.data());
  for (std::size_t i = 0; i < H; ++i) {
    act.h1[i] = act.pre1[i] >= 0.0 ? act.pre1[i] : spec.leak_slope * act.pre1[i];
  }
  affine(p.w2, p.b2, act.h1.data(), H, H, act.audio.data());
}

void run_head(const ModelSpec& spec, const Blocks<const double>& p, Activations& act) {
  const auto H = spec.hidden;
  const auto E = spec.embed;
  act.text.resize(E);
  affine(p.wt, p.bt, act.t_vec.data(), E, E, act.text.data());
  act.fused.resize(H + E);
  std::copy(act.audio.begin(), act.audio.end(), act.fused.begin());
  std::copy(act.text.begin(), act.text.end(), act.fused.begin() + static_cast<std::ptrdiff_t>(H));
  affine(p.wf, p.bf, act.fused.data(), spec.classes, H + E, act.logits.data());
}

void embed_tokens(const ModelSpec& spec, const Blocks<const double>& p, const MetaPrompt& prompt,
                  std::vector<double>& t_vec) {
  const auto E = spec.embed;
  t_vec.assign(E, 0.0);
  for (TokenId tok : prompt.tokens) {
    if (tok >= spec.vocab) raise(ErrorKind::UnknownToken, "token id " + std::to_string(tok));
    const double* row = p.emb + static_cast<std::size_t>(tok) * E;
    for (std::size_t i = 0; i < E; ++i) t_vec[i] += row[i];
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (freq_bins == 0 || time_frames == 0 || pool_freq == 0 || pool_time == 0 || hidden == 0 ||
      embed == 0 || vocab == 0) {
    raise(ErrorKind::Config, "model dimensions must be positive");
  }
  if (classes != kNumClasses) raise(ErrorKind::Config, "model must have 4 output classes");
  if (!(leak_slope >= 0.0 && leak_slope < 1.0)) raise(ErrorKind::Config, "leak slope in [0,1)");
  if (!std::isfinite(input_shift) || !(input_scale > 0.0) || !std::isfinite(input_scale)) {
    raise(ErrorKind::Config, "input_shift must be finite and input_scale positive");
  }
}

std::shared_ptr<const Registry> make_registry(const ModelSpec& spec) {
  spec.validate();
  auto reg = std::make_shared<Registry>();
  const auto D = spec.pooled_size();
  const auto H = spec.hidden;
  const auto E = spec.embed;
  reg->add("audio1.weight", {H, D});
  reg->add("audio1.bias", {H});
  reg->add("audio2.weight", {H, H});
  reg->add("audio2.bias", {H});
  reg->add("embedding.table", {spec.vocab, E});
  reg->add("text.weight", {E, E});
  reg->add("text.bias", {E});
  reg->add("fusion.weight", {spec.classes, H + E});
  reg->add("fusion.bias", {spec.classes});
  return reg;
}

FlatModel init_model(const ModelSpec& spec, RngStream& stream) {
  FlatModel m{spec, ParamVector(make_registry(spec))};
  const auto D = static_cast<double>(spec.pooled_size());
  const auto H = static_cast<double>(spec.hidden);
  const auto E = static_cast<double>(spec.embed);
  const std::pair<std::string_view, double> fan_in[] = {
      {"audio1.weight", D}, {"audio1.bias", D},  {"audio2.weight", H}, {"audio2.bias", H},
      {"embedding.table", 1.0}, {"text.weight", E}, {"text.bias", E},
      {"fusion.weight", H + E}, {"fusion.bias", H + E}};
  for (const auto& [name, fan] : fan_in) {
    const double s = std::sqrt(1.0 / fan);
    for (double& v : m.params.block(name)) v = uniform(stream, -s, s);
  }
  return m;
}

FlatModel zero_model(const ModelSpec& spec) { return {spec, ParamVector(make_registry(spec))}; }

std::vector<double> pool_grid(const ModelSpec& spec, const SpecGrid& x) {
  check_grid(spec, x);
  const auto nf = spec.pooled_freq();
  const auto nt = spec.pooled_time();
  std::vector<double> sums(nf * nt, 0.0);
  for (std::size_t f = 0; f < x.freq_bins(); ++f) {
    auto row = x.row(f);
    double* out = sums.data() + (f / spec.pool_freq) * nt;
    for (std::size_t t = 0; t < row.size(); ++t) out[t / spec.pool_time] += row[t];
  }
  for (std::size_t i = 0; i < nf; ++i) {
    const auto hf = std::min(spec.pool_freq, x.freq_bins() - i * spec.pool_freq);
    for (std::size_t j = 0; j < nt; ++j) {
      const auto ht = std::min(spec.pool_time, x.time_frames() - j * spec.pool_time);
      sums[i * nt + j] /= static_cast<double>(hf * ht);
    }
  }
  return sums;
}

SpecGrid normalize_input(const ModelSpec& spec, const SpecGrid& x) {
  SpecGrid z = x;
  for (auto& v : z.values()) v = (v - spec.input_shift) / spec.input_scale;
  return z;
}

SpecGrid denormalize_input(const ModelSpec& spec, const SpecGrid& z) {
  SpecGrid x = z;
  for (auto& v : x.values()) v = v * spec.input_scale + spec.input_shift;
  return x;
}

Logits forward(const FlatModel& m, const SpecGrid& x, std::span<const double> t_vec) {
  if (t_vec.size() != m.spec.embed) raise(ErrorKind::ShapeMismatch, "text vector width");
  const auto p = resolve(m.params.registry(), m.params.values());
  Activations act;
  run_audio(m.spec, p, x, act);
  act.t_vec.assign(t_vec.begin(), t_vec.end());
  run_head(m.spec, p, act);
  return act.logits;
}

Logits forward(const FlatModel& m, const SpecGrid& x, const MetaPrompt& prompt) {
  const auto p = resolve(m.params.registry(), m.params.values());
  Activations act;
  run_audio(m.spec, p, x, act);
  embed_tokens(m.spec, p, prompt, act.t_vec);
  run_head(m.spec, p, act);
  return act.logits;
}

std::array<double, kNumClasses> softmax(const Logits& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumClasses> p{};
  double z = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::size_t predict(const FlatModel& m, const SpecGrid& x, const MetaPrompt& prompt) {
  const auto logits = forward(m, x, prompt);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

EmbeddingTable embedding_table(const FlatModel& m) {
  return {m.params.block("embedding.table"), m.spec.vocab, m.spec.embed};
}

std::vector<double> embed_audio(const FlatModel& m, const SpecGrid& x) {
  const auto p = resolve(m.params.registry(), m.params.values());
  Activations act;
  run_audio(m.spec, p, x, act);
  return act.audio;
}

LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                       std::span<const SampleView> batch) {
  if (batch.empty()) raise(ErrorKind::EmptyBatch, "loss_and_grad needs at least one sample");
  const auto H = spec.hidden;
  const auto E = spec.embed;
  const auto K = spec.classes;
  const auto D = spec.pooled_size();
  const auto p = resolve(params.registry(), params.values());

  LossGrad out{0.0, ParamVector(params.registry_ptr())};
  const auto g = resolve(params.registry(), out.grad.values());

  Activations act;
  std::vector<double> d_fused(H + E), d_h1(H), d_t(E);
  std::array<double, kNumClasses> d_logits{};

  for (const auto& s : batch) {
    run_audio(spec, p, *s.grid, act);
    embed_tokens(spec, p, s.prompt, act.t_vec);
    run_head(spec, p, act);

    // Log-softmax cross-entropy against a (possibly soft) target.
    const double mx = *std::max_element(act.logits.begin(), act.logits.end());
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(act.logits[k] - mx);
    const double log_z = mx + std::log(z);
    double mass = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      out.loss -= s.target[k] * (act.logits[k] - log_z);
      mass += s.target[k];
    }
    for (std::size_t k = 0; k < K; ++k) {
      d_logits[k] = std::exp(act.logits[k] - log_z) * mass - s.target[k];
    }

    // Head.
    std::fill(d_fused.begin(), d_fused.end(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double dk = d_logits[k];
      g.bf[k] += dk;
      double* gw = g.wf + k * (H + E);
      const double* w = p.wf + k * (H + E);
      for (std::size_t j = 0; j < H + E; ++j) {
        gw[j] += dk * act.fused[j];
        d_fused[j] += dk * w[j];
      }
    }

    // Text branch.
    std::fill(d_t.begin(), d_t.end(), 0.0);
    for (std::size_t r = 0; r < E; ++r) {
      const double dr = d_fused[H + r];
      g.bt[r] += dr;
      double* gw = g.wt + r * E;
      const double* w = p.wt + r * E;
      for (std::size_t c = 0; c < E; ++c) {
        gw[c] += dr * act.t_vec[c];
        d_t[c] += dr * w[c];
      }
    }
    for (TokenId tok : s.prompt.tokens) {
      double* row = g.emb + static_cast<std::size_t>(tok) * E;
      for (std::size_t c = 0; c < E; ++c) row[c] += d_t[c];
    }

    // Audio branch.
    std::fill(d_h1.begin(), d_h1.end(), 0.0);
    for (std::size_t r = 0; r < H; ++r) {
      const double dr = d_fused[r];
      g.b2[r] += dr;
      double* gw = g.w2 + r * H;
      const double* w = p.w2 + r * H;
      for (std::size_t c = 0; c < H; ++c) {
        gw[c] += dr * act.h1[c];
        d_h1[c] += dr * w[c];
      }
    }
    for (std::size_t r = 0; r < H; ++r) {
      const double dr = act.pre1[r] >= 0.0 ? d_h1[r] : spec.leak_slope * d_h1[r];
      g.b1[r] += dr;
      double* gw = g.w1 + r * D;
      for (std::size_t c = 0; c < D; ++c) gw[c] += dr * act.pooled[c];
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (double& v : out.grad.values()) v *= inv;
  return out;
}

LossGrad loss_and_grad(const FlatModel& m, std::span<const SampleView> batch) {
  return loss_and_grad(m.spec, m.params, batch);
}

ParamVector finite_difference_hvp(const GradientFn& grad, const ParamVector& theta,
                                  const ParamVector& v, double delta) {
  require_compatible(theta, v);
  if (!(delta > 0.0)) raise(ErrorKind::BadRange, "hvp delta must be positive");
  const double norm = l2_norm(v);
  if (norm == 0.0) return ParamVector(theta.registry_ptr());
  const double h = delta / (norm + delta);
  const ParamVector plus = grad(axpy(h, v, theta));
  const ParamVector minus = grad(axpy(-h, v, theta));
  return (1.0 / (2.0 * h)) * (plus - minus);
}

ParamVector hvp(const FlatModel& m, const SampleView& sample, const ParamVector& v, double delta) {
  const std::array<SampleView, 1> batch{sample};
  const GradientFn grad = [&](const ParamVector& theta) {
    return loss_and_grad(m.spec, theta, batch).grad;
  };
  return finite_difference_hvp(grad, m.params, v, delta);
}

}  // namespace stethofed
