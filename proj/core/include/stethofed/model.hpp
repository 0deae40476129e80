#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "stethofed/labels.hpp"
#include "stethofed/rng.hpp"
#include "stethofed/tensor.hpp"
#include "stethofed/text_meta.hpp"

namespace stethofed {

// Shape of the two-branch classifier:
//   audio: patch-mean-pool(x) -> (. - c) / input_scale
//          where c is input_shift, or the mean of the pooled vector when
//          center_input is set
//          -> affine(H) -> leaky -> affine(H)
//   text:  sum of token embeddings (E) -> affine(E)
//   head:  affine(concat(audio, text)) -> K logits
struct ModelSpec {
  std::size_t freq_bins = 64;
  std::size_t time_frames = 128;
  std::size_t pool_freq = 8;
  std::size_t pool_time = 8;
  std::size_t hidden = 32;
  std::size_t embed = 16;
  std::size_t classes = kNumClasses;
  std::size_t vocab = 1;
  double leak_slope = 0.1;
  // Fixed front-end normalization of the pooled log-power features.
  double input_shift = -80.0;
  double input_scale = 10.0;
  bool center_input = false;

  std::size_t pooled_freq() const noexcept { return (freq_bins + pool_freq - 1) / pool_freq; }
  std::size_t pooled_time() const noexcept { return (time_frames + pool_time - 1) / pool_time; }
  std::size_t pooled_size() const noexcept { return pooled_freq() * pooled_time(); }

  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::shared_ptr<const Registry> make_registry(const ModelSpec& spec);

struct FlatModel {
  ModelSpec spec;
  ParamVector params;
};

// Weights and biases ~ U(-s, s) with s = sqrt(1 / fan_in).
FlatModel init_model(const ModelSpec& spec, RngStream& stream);
FlatModel zero_model(const ModelSpec& spec);

using Logits = std::array<double, kNumClasses>;

// Non-owning training example. The grid must outlive the view.
struct SampleView {
  const SpecGrid* grid = nullptr;
  MetaPrompt prompt;
  LabelDist target{};
};

std::vector<double> pool_grid(const ModelSpec& spec, const SpecGrid& x);

// Elementwise (x - input_shift) / input_scale and its inverse. Training-time
// augmentations operate on normalized grids.
SpecGrid normalize_input(const ModelSpec& spec, const SpecGrid& x);
SpecGrid denormalize_input(const ModelSpec& spec, const SpecGrid& z);

Logits forward(const FlatModel& m, const SpecGrid& x, std::span<const double> t_vec);
Logits forward(const FlatModel& m, const SpecGrid& x, const MetaPrompt& prompt);
std::array<double, kNumClasses> softmax(const Logits& logits);
std::size_t predict(const FlatModel& m, const SpecGrid& x, const MetaPrompt& prompt);

EmbeddingTable embedding_table(const FlatModel& m);

// Audio-branch output (width H): the audio half of the fused representation
// fed to the classifier head.
std::vector<double> embed_audio(const FlatModel& m, const SpecGrid& x);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Mean cross-entropy over the batch and its exact gradient.
LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                       std::span<const SampleView> batch);
LossGrad loss_and_grad(const FlatModel& m, std::span<const SampleView> batch);

using GradientFn = std::function<ParamVector(const ParamVector&)>;

// [grad(theta + h v) - grad(theta - h v)] / (2h), h = delta / (|v| + delta).
ParamVector finite_difference_hvp(const GradientFn& grad, const ParamVector& theta,
                                  const ParamVector& v, double delta);

// Hessian-vector product of the single-sample cross-entropy at m.params.
ParamVector hvp(const FlatModel& m, const SampleView& sample, const ParamVector& v,
                double delta = 1e-4);

}  // namespace stethofed
