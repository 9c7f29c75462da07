#include "tilesieve/training.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/parallel.hpp"
#include "tilesieve/rng.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>

namespace tilesieve {

namespace {

void check_compatible(const CnnModel &model, const TileDataset &ds, const char *what) {
  if (ds.empty()) {
    throw DataError(std::string(what) + " dataset is empty");
  }
  const CnnConfig &cfg = model.config();
  if (ds.tile_size != cfg.input_size || ds.channels != cfg.input_channels) {
    throw DataError(std::string(what) + " tiles are " + std::to_string(ds.tile_size) +
                    "px x " + std::to_string(ds.channels) + " channels, model expects " +
                    std::to_string(cfg.input_size) + "px x " +
                    std::to_string(cfg.input_channels));
  }
}

std::vector<double> predict_all(const CnnModel &model, const TileDataset &ds) {
  std::vector<double> probs(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    probs[i] = forward(model, ds.samples[i].pixels);
  });
  return probs;
}

double label_value(Label label) { return label == Label::positive ? 1.0 : 0.0; }

} // namespace

double tile_accuracy(const CnnModel &model, const TileDataset &ds) {
  if (ds.empty()) throw DataError("accuracy of an empty dataset");
  const auto probs = predict_all(model, ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool predicted_positive = probs[i] >= 0.5;
    if (predicted_positive == (ds.samples[i].label == Label::positive)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double dataset_loss(const CnnModel &model, const TileDataset &ds) {
  if (ds.empty()) throw DataError("loss of an empty dataset");
  std::vector<Example> batch;
  batch.reserve(ds.size());
  for (const auto &s : ds.samples) batch.push_back(Example{s.pixels, label_value(s.label)});
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    losses[i] = bce_from_logit(forward_logit(model, batch[i].pixels), batch[i].label);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) /
         static_cast<double>(losses.size());
}

TrainResult train(const CnnModel &initial, const TileDataset &train_set,
                  const TileDataset &val_set, const EpochCallback &on_epoch) {
  check_compatible(initial, train_set, "training");
  check_compatible(initial, val_set, "validation");
  const CnnConfig &cfg = initial.config();

  CnnModel model = initial;
  TrainResult result{initial, {}, 0};
  double best_accuracy = -1.0;
  std::vector<double> velocity(model.weights().size(), 0.0);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(mix_seed(cfg.seed, 0x5348554646ULL));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffler.below(i)]);
    }
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Example> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const TileSample &s = train_set.samples[order[i]];
        batch.push_back(Example{s.pixels, label_value(s.label)});
      }
      const auto lg = loss_and_gradients(model, batch);
      if (!std::isfinite(lg.loss)) {
        throw DataError("non-finite training loss at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batch_index));
      }
      loss_sum += lg.loss * static_cast<double>(batch.size());
      auto weights = model.weights();
      for (std::size_t p = 0; p < weights.size(); ++p) {
        velocity[p] = cfg.momentum * velocity[p] - cfg.learning_rate * lg.gradients[p];
        weights[p] += velocity[p];
      }
    }
    model.set_trained_epochs(epoch);
    EpochMetrics m{epoch, loss_sum / static_cast<double>(order.size()),
                   tile_accuracy(model, val_set)};
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.val_accuracy > best_accuracy) {
      best_accuracy = m.val_accuracy;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

void write_metrics_table(std::ostream &out, const std::vector<EpochMetrics> &history) {
  out << "# epoch\ttrain_loss\tval_accuracy\n";
  out << std::fixed;
  for (const auto &m : history) {
    out << m.epoch << '\t' << std::setprecision(6) << m.train_loss << '\t'
        << std::setprecision(4) << m.val_accuracy << '\n';
  }
}

} // namespace tilesieve
