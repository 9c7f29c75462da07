#include "tilesieve/aggregate.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/imaging.hpp"
#include "tilesieve/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace tilesieve {

Label decide(double mean_prob) {
  return mean_prob >= kDecisionBoundary ? Label::positive : Label::negative;
}

PaintingResult summarize_painting(std::string painting_id, std::vector<TileRecord> tiles,
                                  std::optional<Label> true_label) {
  PaintingResult r;
  r.painting_id = std::move(painting_id);
  r.true_label = true_label;
  r.tiles_total = tiles.size();
  double sum = 0.0;
  for (const auto &t : tiles) {
    if (!t.kept) continue;
    if (!t.probability) {
      throw UsageError("kept tile at (" + std::to_string(t.x) + "," +
                       std::to_string(t.y) + ") has no probability");
    }
    sum += *t.probability;
    ++r.tiles_kept;
  }
  if (r.tiles_kept == 0) {
    throw DataError("painting " + r.painting_id +
                    " is unclassifiable: no tile passed the entropy sieve");
  }
  r.mean_prob = sum / static_cast<double>(r.tiles_kept);
  r.predicted = decide(r.mean_prob);
  r.tiles = std::move(tiles);
  return r;
}

PaintingResult classify_painting(const CnnModel &model, const ImageBuffer &img,
                                 const TileSpec &spec, std::string painting_id,
                                 std::optional<Label> true_label) {
  const CnnConfig &cfg = model.config();
  if (spec.size != cfg.input_size) {
    throw UsageError("tile size " + std::to_string(spec.size) +
                     " does not match the model input size " +
                     std::to_string(cfg.input_size));
  }
  if (img.channels() != cfg.input_channels) {
    throw DataError("image has " + std::to_string(img.channels()) +
                    " channels, model expects " + std::to_string(cfg.input_channels));
  }
  auto tiles = sieve(to_luma(img), grid_tiles(img, spec));
  parallel_for(tiles.size(), [&](std::size_t i) {
    TileRecord &t = tiles[i];
    if (t.kept) t.probability = forward(model, tile_tensor(img, t.x, t.y, t.size));
  });
  return summarize_painting(std::move(painting_id), std::move(tiles), true_label);
}

std::optional<double> classification_error(const PaintingResult &r) {
  if (!r.true_label) {
    throw UsageError("painting " + r.painting_id + " has no true label");
  }
  if (r.predicted == *r.true_label) return std::nullopt;
  return std::abs(r.mean_prob - kDecisionBoundary);
}

double set_accuracy(const std::vector<PaintingResult> &results) {
  if (results.empty()) throw UsageError("accuracy of an empty result set");
  std::size_t correct = 0;
  for (const auto &r : results) {
    if (!r.true_label) {
      throw UsageError("painting " + r.painting_id + " has no true label");
    }
    if (r.predicted == *r.true_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

double combine(double p_a, double p_b, double w) { return w * p_a + (1.0 - w) * p_b; }

double combine(double p_a, double p_b, const EnsembleWeights &weights) {
  return combine(p_a, p_b, weights.w);
}

EnsembleWeights evaluate_weight(const std::vector<EnsembleSample> &samples, double w) {
  EnsembleWeights e{w, 0.0, 0};
  for (const auto &s : samples) {
    const double p = combine(s.p_a, s.p_b, w);
    if (decide(p) != s.true_label) {
      e.achieved_error += std::abs(p - kDecisionBoundary);
      ++e.misclassified;
    }
  }
  return e;
}

EnsembleWeights optimize_weights(const std::vector<EnsembleSample> &samples) {
  if (samples.empty()) throw UsageError("ensemble weight search needs validation data");
  for (const auto &s : samples) {
    if (!(s.p_a >= 0.0 && s.p_a <= 1.0 && s.p_b >= 0.0 && s.p_b <= 1.0)) {
      throw UsageError("ensemble probabilities must lie in [0, 1]");
    }
  }
  std::vector<EnsembleWeights> grid(kEnsembleGridSteps + 1);
  parallel_for(grid.size(), [&](std::size_t i) {
    grid[i] = evaluate_weight(samples, static_cast<double>(i) / kEnsembleGridSteps);
  });
  EnsembleWeights best = grid.front();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto &c = grid[i];
    if (c.achieved_error < best.achieved_error ||
        (c.achieved_error == best.achieved_error && c.misclassified < best.misclassified)) {
      best = c;
    }
  }
  return best;
}

void write_results_table(std::ostream &out, const std::vector<PaintingResult> &results) {
  out << "# painting_id\tmean_prob\tpredicted\ttrue_label\tn_tiles_kept\tn_tiles_total\n";
  out << std::fixed << std::setprecision(4);
  for (const auto &r : results) {
    out << r.painting_id << '\t' << r.mean_prob << '\t' << to_token(r.predicted) << '\t'
        << (r.true_label ? to_token(*r.true_label) : std::string_view("-")) << '\t'
        << r.tiles_kept << '\t' << r.tiles_total << '\n';
  }
}

std::vector<ResultRow> read_results_table(std::istream &in, const std::string &source_name) {
  std::vector<ResultRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
    std::istringstream fields(line);
    ResultRow row;
    std::string predicted, truth;
    if (!(fields >> row.painting_id >> row.mean_prob >> predicted >> truth >>
          row.tiles_kept >> row.tiles_total)) {
      throw DataError(where + "expected 6 fields");
    }
    if (!(row.mean_prob >= 0.0 && row.mean_prob <= 1.0)) {
      throw DataError(where + "probability outside [0, 1]");
    }
    try {
      row.predicted = parse_label(predicted);
      if (truth != "-") row.true_label = parse_label(truth);
    } catch (const DataError &e) {
      throw DataError(where + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace tilesieve
