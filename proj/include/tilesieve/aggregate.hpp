#pragma once

#include "tilesieve/cnn.hpp"
#include "tilesieve/dataset.hpp"
#include "tilesieve/image.hpp"
#include "tilesieve/tiler.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tilesieve {

inline constexpr double kDecisionBoundary = 0.5;

struct PaintingResult {
  std::string painting_id;
  std::vector<TileRecord> tiles; // every grid tile; kept ones carry a probability
  double mean_prob = 0.0;
  Label predicted = Label::negative;
  std::optional<Label> true_label;
  std::size_t tiles_kept = 0;
  std::size_t tiles_total = 0;
};

// Positive iff p >= 0.5.
Label decide(double mean_prob);

// Builds a result from tiles whose kept entries carry probabilities: mean over
// kept tiles in list order, then the inclusive 0.5 threshold. Throws DataError
// when no tile was kept.
PaintingResult summarize_painting(std::string painting_id, std::vector<TileRecord> tiles,
                                  std::optional<Label> true_label = std::nullopt);

// grid -> sieve on luma -> forward every kept tile -> mean -> threshold.
PaintingResult classify_painting(const CnnModel &model, const ImageBuffer &img,
                                 const TileSpec &spec, std::string painting_id = {},
                                 std::optional<Label> true_label = std::nullopt);

// |mean_prob - 0.5| for a misclassified painting, nullopt when correct.
// Throws UsageError without a true label.
std::optional<double> classification_error(const PaintingResult &r);

double set_accuracy(const std::vector<PaintingResult> &results);

struct EnsembleWeights {
  double w = 1.0;               // weight on model A; B gets 1 - w
  double achieved_error = 0.0;  // summed classification error at w
  std::size_t misclassified = 0;
};

double combine(double p_a, double p_b, const EnsembleWeights &weights);
double combine(double p_a, double p_b, double w);

struct EnsembleSample {
  double p_a = 0.0;
  double p_b = 0.0;
  Label true_label = Label::negative;
};

inline constexpr int kEnsembleGridSteps = 100;

// Summed classification error and miscount of the combination at weight w.
EnsembleWeights evaluate_weight(const std::vector<EnsembleSample> &samples, double w);

// Grid search over w = i/100. Objective: summed classification error of the
// combined probabilities; ties go to fewer misclassifications, then smaller w.
EnsembleWeights optimize_weights(const std::vector<EnsembleSample> &samples);

// Results table: `painting_id mean_prob predicted true_label n_tiles_kept
// n_tiles_total`, probabilities with 4 decimals, '-' for an unknown label.
void write_results_table(std::ostream &out, const std::vector<PaintingResult> &results);

struct ResultRow {
  std::string painting_id;
  double mean_prob = 0.0;
  Label predicted = Label::negative;
  std::optional<Label> true_label;
  std::size_t tiles_kept = 0;
  std::size_t tiles_total = 0;
};

std::vector<ResultRow> read_results_table(std::istream &in,
                                          const std::string &source_name = "results");

} // namespace tilesieve
