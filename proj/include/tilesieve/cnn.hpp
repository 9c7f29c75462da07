#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tilesieve {

enum class Pool : std::uint8_t { none = 0, max2 = 1 };

struct ConvStage {
  int filters = 8;
  int kernel = 3;
  Pool pool = Pool::max2;

  friend bool operator==(const ConvStage &, const ConvStage &) = default;
};

// Network and optimizer settings. The network is
//   [conv(valid) -> ReLU -> optional 2x2 max-pool]* -> dense -> ReLU -> 1 -> sigmoid
// over channel-major square tiles.
struct CnnConfig {
  int input_size = 100;
  int input_channels = 3;
  std::vector<ConvStage> conv_layers = {{8, 3, Pool::max2}, {16, 3, Pool::max2}};
  int dense_units = 32;
  std::uint64_t seed = 42;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 10;
  int batch_size = 16;

  // Throws UsageError, including when the spatial size collapses below 1.
  void validate() const;

  friend bool operator==(const CnnConfig &, const CnnConfig &) = default;
};

struct StageGeometry {
  int in_channels = 0;
  int in_size = 0;
  int filters = 0;
  int kernel = 0;
  int conv_size = 0; // after valid convolution
  int out_size = 0;  // after pooling (== conv_size without pooling)
  Pool pool = Pool::none;
};

// One named parameter tensor inside the flat weight vector.
struct ParamTensor {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::vector<int> shape;
};

// Tensor shapes fully determined by a config, in declaration order:
// conv{i}.weight [F,C,K,K], conv{i}.bias [F], dense.weight [U,N], dense.bias [U],
// out.weight [U], out.bias [1].
struct NetworkShape {
  std::vector<StageGeometry> stages;
  int flat_size = 0;
  int dense_units = 0;
  std::vector<ParamTensor> tensors;
  std::size_t param_count = 0;
  std::size_t input_length = 0;

  static NetworkShape from_config(const CnnConfig &cfg);
  const ParamTensor &tensor(const std::string &name) const;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

class CnnModel {
public:
  CnnModel(CnnConfig config, std::vector<double> weights, int trained_epochs = 0);

  const CnnConfig &config() const { return config_; }
  const NetworkShape &shape() const { return shape_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }
  std::span<const double> tensor(const std::string &name) const;
  std::span<double> tensor(const std::string &name);

  std::uint32_t version() const { return kModelFormatVersion; }
  int trained_epochs() const { return trained_epochs_; }
  void set_trained_epochs(int epochs) { trained_epochs_ = epochs; }

private:
  CnnConfig config_;
  NetworkShape shape_;
  std::vector<double> weights_;
  int trained_epochs_ = 0;
};

// He-normal weights (stddev sqrt(2 / fan_in)) from the config seed, zero biases.
CnnModel init_model(const CnnConfig &cfg);

// Pre-sigmoid score and probability for one normalized tile.
double forward_logit(const CnnModel &model, std::span<const float> tile);
double forward(const CnnModel &model, std::span<const float> tile);

struct Example {
  std::span<const float> pixels;
  double label = 0.0; // exactly 0 or 1
};

struct LossAndGradients {
  double loss = 0.0;
  std::vector<double> gradients; // same layout as CnnModel::weights()
};

// Mean binary cross-entropy over the batch and its exact gradient.
// Per-example gradients are computed in parallel and summed in batch order.
LossAndGradients loss_and_gradients(const CnnModel &model,
                                    std::span<const Example> batch);

double sigmoid(double z);

// Binary cross-entropy of a logit against a 0/1 label, stable for large |z|.
double bce_from_logit(double z, double label);

} // namespace tilesieve
