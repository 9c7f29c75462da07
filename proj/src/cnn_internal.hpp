#pragma once

#include "tilesieve/cnn.hpp"

#include <vector>

namespace tilesieve::detail {

struct StageActivations {
  std::vector<double> conv;             // post-ReLU conv output [F, cs, cs]
  std::vector<double> pooled;           // [F, os, os]; empty without pooling
  std::vector<std::uint32_t> argmax;    // pooled index -> conv index
  const std::vector<double> &output() const { return pooled.empty() ? conv : pooled; }
};

struct ForwardPass {
  std::vector<double> input;
  std::vector<StageActivations> stages;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  double logit = 0.0;

  const std::vector<double> &flat() const {
    return stages.empty() ? input : stages.back().output();
  }
};

ForwardPass run_forward(const CnnModel &model, std::span<const float> tile);

// Backpropagates d(score)/d(logit) = `d_logit`. Accumulates parameter
// gradients into `grad` when non-empty. When `d_last_conv` is non-null it
// receives the gradient w.r.t. the last conv stage's post-ReLU activations.
void run_backward(const CnnModel &model, const ForwardPass &pass, double d_logit,
                  std::span<double> grad, std::vector<double> *d_last_conv);

} // namespace tilesieve::detail
