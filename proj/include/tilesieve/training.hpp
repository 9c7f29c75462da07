#pragma once

#include "tilesieve/cnn.hpp"
#include "tilesieve/dataset.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace tilesieve {

struct EpochMetrics {
  int epoch = 0;             // 1-based
  double train_loss = 0.0;   // mean over the epoch's examples
  double val_accuracy = 0.0; // tile-level, threshold 0.5
};

struct TrainResult {
  CnnModel model;            // weights of the best validation epoch
  std::vector<EpochMetrics> history;
  int best_epoch = 0;        // 0 when no epoch ran
};

using EpochCallback = std::function<void(const EpochMetrics &)>;

// SGD with momentum over seeded shuffles, using the optimizer settings in the
// model's config. Validation accuracy ties keep the earlier epoch. Throws
// DataError on empty datasets, mismatched tile sizes, or a non-finite loss.
TrainResult train(const CnnModel &initial, const TileDataset &train_set,
                  const TileDataset &val_set, const EpochCallback &on_epoch = {});

// Fraction of tiles whose thresholded prediction matches the label.
double tile_accuracy(const CnnModel &model, const TileDataset &ds);

// Mean binary cross-entropy over a whole dataset.
double dataset_loss(const CnnModel &model, const TileDataset &ds);

void write_metrics_table(std::ostream &out, const std::vector<EpochMetrics> &history);

} // namespace tilesieve
