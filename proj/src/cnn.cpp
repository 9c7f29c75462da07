#include "tilesieve/cnn.hpp"

#include "cnn_internal.hpp"
#include "tilesieve/error.hpp"
#include "tilesieve/parallel.hpp"
#include "tilesieve/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tilesieve {

namespace {

void add_tensor(NetworkShape &shape, std::string name, std::vector<int> dims) {
  std::size_t size = 1;
  for (const int d : dims) size *= static_cast<std::size_t>(d);
  shape.tensors.push_back(ParamTensor{std::move(name), shape.param_count, size,
                                      std::move(dims)});
  shape.param_count += size;
}

} // namespace

void CnnConfig::validate() const { (void)NetworkShape::from_config(*this); }

NetworkShape NetworkShape::from_config(const CnnConfig &cfg) {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw UsageError("invalid network config: " + what);
  };
  require(cfg.input_size >= 1, "input_size must be >= 1");
  require(cfg.input_channels >= 1, "input_channels must be >= 1");
  require(cfg.dense_units >= 1, "dense_units must be >= 1");
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  require(cfg.epochs >= 0, "epochs must be >= 0");
  require(std::isfinite(cfg.learning_rate) && cfg.learning_rate >= 0.0,
          "learning_rate must be finite and non-negative");
  require(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "momentum must lie in [0, 1)");

  NetworkShape shape;
  int channels = cfg.input_channels;
  int size = cfg.input_size;
  shape.input_length = static_cast<std::size_t>(channels) * size * size;
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const ConvStage &s = cfg.conv_layers[i];
    const std::string label = "conv stage " + std::to_string(i + 1);
    require(s.filters >= 1, label + " needs >= 1 filter");
    require(s.kernel >= 1, label + " needs kernel >= 1");
    StageGeometry g;
    g.in_channels = channels;
    g.in_size = size;
    g.filters = s.filters;
    g.kernel = s.kernel;
    g.pool = s.pool;
    g.conv_size = size - s.kernel + 1;
    require(g.conv_size >= 1, label + ": kernel " + std::to_string(s.kernel) +
                                  " does not fit spatial size " + std::to_string(size));
    g.out_size = s.pool == Pool::max2 ? g.conv_size / 2 : g.conv_size;
    require(g.out_size >= 1, label + ": pooling collapses spatial size " +
                                 std::to_string(g.conv_size) + " below 1");
    shape.stages.push_back(g);
    add_tensor(shape, "conv" + std::to_string(i + 1) + ".weight",
               {s.filters, channels, s.kernel, s.kernel});
    add_tensor(shape, "conv" + std::to_string(i + 1) + ".bias", {s.filters});
    channels = s.filters;
    size = g.out_size;
  }
  shape.flat_size = channels * size * size;
  shape.dense_units = cfg.dense_units;
  add_tensor(shape, "dense.weight", {cfg.dense_units, shape.flat_size});
  add_tensor(shape, "dense.bias", {cfg.dense_units});
  add_tensor(shape, "out.weight", {cfg.dense_units});
  add_tensor(shape, "out.bias", {1});
  return shape;
}

const ParamTensor &NetworkShape::tensor(const std::string &name) const {
  for (const auto &t : tensors) {
    if (t.name == name) return t;
  }
  throw UsageError("no parameter tensor named " + name);
}

CnnModel::CnnModel(CnnConfig config, std::vector<double> weights, int trained_epochs)
    : config_(std::move(config)), shape_(NetworkShape::from_config(config_)),
      weights_(std::move(weights)), trained_epochs_(trained_epochs) {
  if (weights_.size() != shape_.param_count) {
    throw UsageError("weight vector has " + std::to_string(weights_.size()) +
                     " values, config requires " + std::to_string(shape_.param_count));
  }
}

std::span<const double> CnnModel::tensor(const std::string &name) const {
  const auto &t = shape_.tensor(name);
  return std::span<const double>(weights_).subspan(t.offset, t.size);
}

std::span<double> CnnModel::tensor(const std::string &name) {
  const auto &t = shape_.tensor(name);
  return std::span<double>(weights_).subspan(t.offset, t.size);
}

CnnModel init_model(const CnnConfig &cfg) {
  const NetworkShape shape = NetworkShape::from_config(cfg);
  std::vector<double> weights(shape.param_count, 0.0);
  Rng rng(cfg.seed);
  for (const auto &t : shape.tensors) {
    if (t.shape.size() == 1 && t.name != "out.weight") continue; // biases stay 0
    const std::size_t fan_out = static_cast<std::size_t>(t.shape.front());
    const std::size_t fan_in = t.name == "out.weight" ? t.size : t.size / fan_out;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size; ++i) {
      weights[t.offset + i] = stddev * rng.normal();
    }
  }
  return CnnModel(cfg, std::move(weights));
}

double bce_from_logit(double z, double label) {
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - label * z;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

ForwardPass run_forward(const CnnModel &model, std::span<const float> tile) {
  const NetworkShape &shape = model.shape();
  if (tile.size() != shape.input_length) {
    throw UsageError("tile has " + std::to_string(tile.size()) +
                     " samples, model expects " + std::to_string(shape.input_length));
  }
  ForwardPass pass;
  pass.input.assign(tile.begin(), tile.end());
  const std::vector<double> *in = &pass.input;
  pass.stages.resize(shape.stages.size());

  for (std::size_t s = 0; s < shape.stages.size(); ++s) {
    const StageGeometry &g = shape.stages[s];
    const auto weight = model.tensor("conv" + std::to_string(s + 1) + ".weight");
    const auto bias = model.tensor("conv" + std::to_string(s + 1) + ".bias");
    StageActivations &act = pass.stages[s];
    const int cs = g.conv_size;
    const int k = g.kernel;
    const std::size_t plane_in = static_cast<std::size_t>(g.in_size) * g.in_size;
    const std::size_t plane_out = static_cast<std::size_t>(cs) * cs;
    act.conv.assign(static_cast<std::size_t>(g.filters) * plane_out, 0.0);

    for (int f = 0; f < g.filters; ++f) {
      double *out = act.conv.data() + f * plane_out;
      std::fill(out, out + plane_out, bias[f]);
      for (int c = 0; c < g.in_channels; ++c) {
        const double *src = in->data() + c * plane_in;
        const double *w = weight.data() + (static_cast<std::size_t>(f) * g.in_channels + c) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const double wv = w[ky * k + kx];
            for (int oy = 0; oy < cs; ++oy) {
              const double *row = src + (oy + ky) * g.in_size + kx;
              double *o = out + oy * cs;
              for (int ox = 0; ox < cs; ++ox) o[ox] += wv * row[ox];
            }
          }
        }
      }
      for (std::size_t i = 0; i < plane_out; ++i) out[i] = std::max(0.0, out[i]);
    }

    if (g.pool == Pool::max2) {
      const int os = g.out_size;
      act.pooled.assign(static_cast<std::size_t>(g.filters) * os * os, 0.0);
      act.argmax.assign(act.pooled.size(), 0);
      for (int f = 0; f < g.filters; ++f) {
        for (int py = 0; py < os; ++py) {
          for (int px = 0; px < os; ++px) {
            std::uint32_t best = static_cast<std::uint32_t>(f * plane_out + (2 * py) * cs + 2 * px);
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const auto idx = static_cast<std::uint32_t>(f * plane_out + (2 * py + dy) * cs + 2 * px + dx);
                if (act.conv[idx] > act.conv[best]) best = idx;
              }
            }
            const std::size_t p = (static_cast<std::size_t>(f) * os + py) * os + px;
            act.pooled[p] = act.conv[best];
            act.argmax[p] = best;
          }
        }
      }
    }
    in = &act.output();
  }

  const auto dense_w = model.tensor("dense.weight");
  const auto dense_b = model.tensor("dense.bias");
  const auto out_w = model.tensor("out.weight");
  const auto out_b = model.tensor("out.bias");
  const std::vector<double> &flat = pass.flat();
  const int units = shape.dense_units;
  const std::size_t n = static_cast<std::size_t>(shape.flat_size);
  pass.hidden_pre.assign(units, 0.0);
  pass.hidden.assign(units, 0.0);
  double logit = out_b[0];
  for (int j = 0; j < units; ++j) {
    const double *w = dense_w.data() + j * n;
    double acc = dense_b[j];
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * flat[i];
    pass.hidden_pre[j] = acc;
    pass.hidden[j] = std::max(0.0, acc);
    logit += out_w[j] * pass.hidden[j];
  }
  pass.logit = logit;
  return pass;
}

void run_backward(const CnnModel &model, const ForwardPass &pass, double d_logit,
                  std::span<double> grad, std::vector<double> *d_last_conv) {
  const NetworkShape &shape = model.shape();
  const bool want_params = !grad.empty();
  auto grad_of = [&](const std::string &name) {
    const auto &t = shape.tensor(name);
    return grad.subspan(t.offset, t.size);
  };

  const auto dense_w = model.tensor("dense.weight");
  const auto out_w = model.tensor("out.weight");
  const std::vector<double> &flat = pass.flat();
  const int units = shape.dense_units;
  const std::size_t n = static_cast<std::size_t>(shape.flat_size);

  std::vector<double> d_hidden_pre(units);
  for (int j = 0; j < units; ++j) {
    d_hidden_pre[j] = pass.hidden_pre[j] > 0.0 ? d_logit * out_w[j] : 0.0;
  }
  if (want_params) {
    auto g_out_w = grad_of("out.weight");
    auto g_out_b = grad_of("out.bias");
    auto g_dense_w = grad_of("dense.weight");
    auto g_dense_b = grad_of("dense.bias");
    for (int j = 0; j < units; ++j) g_out_w[j] += d_logit * pass.hidden[j];
    g_out_b[0] += d_logit;
    for (int j = 0; j < units; ++j) {
      const double d = d_hidden_pre[j];
      g_dense_b[j] += d;
      if (d == 0.0) continue;
      double *gw = g_dense_w.data() + j * n;
      for (std::size_t i = 0; i < n; ++i) gw[i] += d * flat[i];
    }
  }
  if (shape.stages.empty()) return;

  std::vector<double> d_out(n, 0.0);
  for (int j = 0; j < units; ++j) {
    const double d = d_hidden_pre[j];
    if (d == 0.0) continue;
    const double *w = dense_w.data() + j * n;
    for (std::size_t i = 0; i < n; ++i) d_out[i] += d * w[i];
  }

  for (std::size_t si = shape.stages.size(); si-- > 0;) {
    const StageGeometry &g = shape.stages[si];
    const StageActivations &act = pass.stages[si];
    std::vector<double> d_conv(act.conv.size(), 0.0);
    if (g.pool == Pool::max2) {
      for (std::size_t p = 0; p < act.argmax.size(); ++p) d_conv[act.argmax[p]] += d_out[p];
    } else {
      d_conv = d_out;
    }
    if (si + 1 == shape.stages.size() && d_last_conv != nullptr) {
      *d_last_conv = d_conv;
      if (!want_params) return;
    }
    for (std::size_t i = 0; i < d_conv.size(); ++i) {
      if (act.conv[i] <= 0.0) d_conv[i] = 0.0;
    }

    const std::vector<double> &in = si == 0 ? pass.input : pass.stages[si - 1].output();
    const std::string prefix = "conv" + std::to_string(si + 1);
    const auto weight = model.tensor(prefix + ".weight");
    auto g_weight = grad_of(prefix + ".weight");
    auto g_bias = grad_of(prefix + ".bias");
    const int cs = g.conv_size;
    const int k = g.kernel;
    const std::size_t plane_in = static_cast<std::size_t>(g.in_size) * g.in_size;
    const std::size_t plane_out = static_cast<std::size_t>(cs) * cs;
    const bool need_input_grad = si > 0;
    std::vector<double> d_in(need_input_grad ? in.size() : 0, 0.0);

    for (int f = 0; f < g.filters; ++f) {
      const double *dc = d_conv.data() + f * plane_out;
      double bias_acc = 0.0;
      for (std::size_t i = 0; i < plane_out; ++i) bias_acc += dc[i];
      g_bias[f] += bias_acc;
      for (int c = 0; c < g.in_channels; ++c) {
        const double *src = in.data() + c * plane_in;
        const std::size_t w_base = (static_cast<std::size_t>(f) * g.in_channels + c) * k * k;
        double *d_src = need_input_grad ? d_in.data() + c * plane_in : nullptr;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const double wv = weight[w_base + ky * k + kx];
            double acc = 0.0;
            for (int oy = 0; oy < cs; ++oy) {
              const double *row = src + (oy + ky) * g.in_size + kx;
              const double *drow = dc + oy * cs;
              for (int ox = 0; ox < cs; ++ox) acc += drow[ox] * row[ox];
              if (d_src != nullptr) {
                double *dst = d_src + (oy + ky) * g.in_size + kx;
                for (int ox = 0; ox < cs; ++ox) dst[ox] += wv * drow[ox];
              }
            }
            g_weight[w_base + ky * k + kx] += acc;
          }
        }
      }
    }
    if (!need_input_grad) break;
    d_out = std::move(d_in);
  }
}

} // namespace detail

double forward_logit(const CnnModel &model, std::span<const float> tile) {
  return detail::run_forward(model, tile).logit;
}

double forward(const CnnModel &model, std::span<const float> tile) {
  return sigmoid(forward_logit(model, tile));
}

LossAndGradients loss_and_gradients(const CnnModel &model,
                                    std::span<const Example> batch) {
  if (batch.empty()) throw UsageError("loss_and_gradients needs a nonempty batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].label != 0.0 && batch[i].label != 1.0) {
      throw UsageError("label of batch example " + std::to_string(i) +
                       " must be 0 or 1");
    }
  }
  const std::size_t params = model.shape().param_count;
  std::vector<std::vector<double>> per_example(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    const auto pass = detail::run_forward(model, batch[i].pixels);
    losses[i] = bce_from_logit(pass.logit, batch[i].label);
    per_example[i].assign(params, 0.0);
    detail::run_backward(model, pass, sigmoid(pass.logit) - batch[i].label,
                         per_example[i], nullptr);
  });

  LossAndGradients out;
  out.gradients.assign(params, 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    for (std::size_t p = 0; p < params; ++p) out.gradients[p] += per_example[i][p];
  }
  out.loss *= scale;
  for (double &g : out.gradients) g *= scale;
  return out;
}

} // namespace tilesieve
