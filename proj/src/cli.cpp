#include "tilesieve/cli.hpp"

#include "tilesieve/aggregate.hpp"
#include "tilesieve/dataset.hpp"
#include "tilesieve/error.hpp"
#include "tilesieve/gradcam.hpp"
#include "tilesieve/image_io.hpp"
#include "tilesieve/imaging.hpp"
#include "tilesieve/model_io.hpp"
#include "tilesieve/parallel.hpp"
#include "tilesieve/probmap.hpp"
#include "tilesieve/rng.hpp"
#include "tilesieve/synthgen.hpp"
#include "tilesieve/tiler.hpp"
#include "tilesieve/training.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace tilesieve::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 42;
  int threads = 1;
  int verbosity = 0;
};

struct EntropyOptions {
  std::string image;
};

struct TileOptions {
  std::string image;
  int size = 100;
  int stride = 0; // 0 = size / 2
  std::string out;
};

struct SynthOptions {
  std::string out_dir;
  int per_class = 10;
  int width = 600;
  int height = 600;
  double orientation_a = 0.0;
  double orientation_b = 90.0;
  int noise = 24;
  int strokes = -1; // -1 = scale with area
};

struct TrainOptions {
  std::string manifest;
  int size = 100;
  int stride = 0;
  std::vector<int> filters = {8, 16};
  int kernel = 3;
  bool no_pool = false;
  int dense = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 10;
  int batch = 16;
  std::string out;
  std::string metrics;
};

struct ClassifyOptions {
  std::string model;
  std::vector<std::string> images;
  std::string manifest;
  std::vector<std::string> splits = {"test"};
  int stride = 0;
  std::string out;
};

struct MapOptions {
  std::string model;
  std::string image;
  int stride = 0;
  double alpha = kDefaultOverlayAlpha;
  bool no_overlay = false;
  std::string out;
  std::string raw;
  std::string legend;
};

struct EnsembleOptions {
  std::string results_a;
  std::string results_b;
  std::string labels;
  std::string fit_split = "val";
  std::string out;
};

struct GradcamOptions {
  std::string model;
  std::string image;
  int x = -1;
  int y = -1;
  double alpha = 0.0;
  std::string out;
  std::string raw;
};

TileSpec make_spec(int size, int stride) {
  TileSpec spec{size, stride == 0 ? TileSpec::with_default_stride(size).stride : stride};
  spec.validate();
  return spec;
}

std::ofstream open_output(const fs::path &path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Writes to `path`, or to `fallback` when path is empty.
template <typename Fn>
void emit(const std::string &path, std::ostream &fallback, Fn &&write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  auto out = open_output(path);
  write(out);
  if (!out) throw DataError("cannot write " + path);
}

void require_channels(const CnnModel &model, const ImageBuffer &img, const std::string &what) {
  if (img.channels() != model.config().input_channels) {
    throw DataError(what + " has " + std::to_string(img.channels()) +
                    " channels, model expects " +
                    std::to_string(model.config().input_channels));
  }
}

int cmd_entropy(const EntropyOptions &o, std::ostream &out) {
  const double h = image_entropy(to_luma(load_image(o.image)));
  out << std::fixed << std::setprecision(6) << h << '\n';
  return kOk;
}

int cmd_tile(const TileOptions &o, const GlobalOptions &g, std::ostream &out,
             std::ostream &err) {
  const TileSpec spec = make_spec(o.size, o.stride);
  const ImageBuffer img = load_image(o.image);
  const ImageBuffer luma = to_luma(img);
  const auto tiles = sieve(luma, grid_tiles(img, spec));
  emit(o.out, out, [&](std::ostream &s) { write_tile_manifest(s, tiles); });
  if (g.verbosity >= 0) {
    err << "image entropy " << std::fixed << std::setprecision(6) << image_entropy(luma)
        << " bits; kept " << std::setprecision(4) << coverage_fraction(tiles) << " of "
        << tiles.size() << " tiles\n";
  }
  return kOk;
}

int cmd_synth(const SynthOptions &o, const GlobalOptions &g, std::ostream &out) {
  StyleParams a;
  a.stroke_orientation = o.orientation_a;
  a.noise_amplitude = o.noise;
  a.stroke_count = o.strokes >= 0
                       ? o.strokes
                       : static_cast<int>(static_cast<long long>(o.width) * o.height /
                                          (a.stroke_length * a.stroke_width));
  a.seed = mix_seed(g.seed, 1);
  StyleParams b = a;
  b.stroke_orientation = o.orientation_b;
  b.seed = mix_seed(g.seed, 2);
  const auto manifest = generate_corpus(a, b, o.per_class, o.width, o.height, o.out_dir);
  out << manifest.string() << '\n';
  return kOk;
}

int cmd_train(const TrainOptions &o, const GlobalOptions &g, std::ostream &out,
              std::ostream &err) {
  const TileSpec spec = make_spec(o.size, o.stride);
  CnnConfig cfg;
  cfg.input_size = o.size;
  cfg.conv_layers.clear();
  for (const int f : o.filters) {
    cfg.conv_layers.push_back(ConvStage{f, o.kernel, o.no_pool ? Pool::none : Pool::max2});
  }
  cfg.dense_units = o.dense;
  cfg.seed = g.seed;
  cfg.learning_rate = o.learning_rate;
  cfg.momentum = o.momentum;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;

  const auto entries = read_manifest(o.manifest);
  const TileDataset train_set = build_dataset(entries, spec, Split::train);
  const TileDataset val_set = build_dataset(entries, spec, Split::val);
  for (const auto *ds : {&train_set, &val_set}) {
    for (const auto &w : ds->warnings) err << "warning: " << w << '\n';
  }
  cfg.input_channels = train_set.channels;
  cfg.validate();

  const ClassBalance balance = class_balance(train_set);
  err << "training tiles " << train_set.size() << " (positive fraction " << std::fixed
      << std::setprecision(4) << balance.positive_fraction << "), validation tiles "
      << val_set.size() << '\n';

  const CnnModel initial = init_model(cfg);
  const TrainResult result = train(initial, train_set, val_set, [&](const EpochMetrics &m) {
    err << "epoch " << m.epoch << " loss " << std::setprecision(6) << m.train_loss
        << " val_acc " << std::setprecision(4) << m.val_accuracy << '\n';
  });
  save_model(result.model, o.out);
  const std::string metrics = o.metrics.empty() ? o.out + ".metrics.tsv" : o.metrics;
  emit(metrics, out, [&](std::ostream &s) { write_metrics_table(s, result.history); });
  out << "model\t" << o.out << "\nbest_epoch\t" << result.best_epoch << '\n';
  return kOk;
}

std::set<Split> parse_splits(const std::vector<std::string> &tokens) {
  std::set<Split> splits;
  for (const auto &t : tokens) {
    if (t == "all") return {Split::train, Split::val, Split::test};
    try {
      splits.insert(parse_split(t));
    } catch (const DataError &e) {
      throw UsageError(e.what());
    }
  }
  return splits;
}

int cmd_classify(const ClassifyOptions &o, std::ostream &out, std::ostream &err) {
  if (o.images.empty() == o.manifest.empty()) {
    throw UsageError("classify needs either image paths or --manifest (not both)");
  }
  const CnnModel model = load_model(o.model);
  const TileSpec spec = make_spec(model.config().input_size, o.stride);

  struct Job {
    fs::path path;
    std::string id;
    std::optional<Label> label;
  };
  std::vector<Job> jobs;
  if (!o.manifest.empty()) {
    const auto splits = parse_splits(o.splits);
    for (const auto &e : read_manifest(o.manifest)) {
      if (splits.contains(e.split)) jobs.push_back({e.path, e.painting_id, e.label});
    }
    if (jobs.empty()) throw DataError("no manifest entries in the requested splits");
  } else {
    for (const auto &p : o.images) jobs.push_back({p, fs::path(p).stem().string(), std::nullopt});
  }

  std::vector<PaintingResult> results;
  for (const auto &job : jobs) {
    const ImageBuffer img = load_image(job.path);
    require_channels(model, img, job.path.string());
    results.push_back(classify_painting(model, img, spec, job.id, job.label));
  }
  emit(o.out, out, [&](std::ostream &s) { write_results_table(s, results); });
  bool all_labeled = true;
  for (const auto &r : results) all_labeled = all_labeled && r.true_label.has_value();
  if (all_labeled) {
    err << "painting accuracy " << std::fixed << std::setprecision(4)
        << set_accuracy(results) << " over " << results.size() << " paintings\n";
  }
  return kOk;
}

int cmd_map(const MapOptions &o, std::ostream &out, std::ostream &err) {
  const CnnModel model = load_model(o.model);
  const TileSpec spec = make_spec(model.config().input_size, o.stride);
  const ImageBuffer img = load_image(o.image);
  require_channels(model, img, o.image);
  const PaintingResult result =
      classify_painting(model, img, spec, fs::path(o.image).stem().string());
  const ProbabilityMap map = accumulate(img.width(), img.height(), result.tiles);
  const ImageBuffer rendered = render(map, o.no_overlay ? nullptr : &img, o.alpha);
  write_png(rendered, o.out);

  fs::path raw = o.raw.empty() ? fs::path(o.out).replace_extension(".tsv") : fs::path(o.raw);
  fs::path legend = o.legend.empty() ? fs::path(o.out).replace_extension(".legend.txt")
                                     : fs::path(o.legend);
  emit(raw.string(), out, [&](std::ostream &s) { write_raw_map(s, map); });
  emit(legend.string(), out, [&](std::ostream &s) { write_legend(s); });
  write_results_table(out, {result});
  err << "map written to " << o.out << " (raw " << raw.string() << ")\n";
  return kOk;
}

std::vector<ResultRow> read_results_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read results table " + path);
  return read_results_table(in, path);
}

int cmd_ensemble(const EnsembleOptions &o, std::ostream &out, std::ostream &err) {
  const auto rows_a = read_results_file(o.results_a);
  const auto rows_b = read_results_file(o.results_b);
  std::map<std::string, const ResultRow *> by_id_b;
  for (const auto &r : rows_b) by_id_b[r.painting_id] = &r;

  std::map<std::string, ManifestEntry> manifest;
  if (!o.labels.empty()) {
    for (auto &e : read_manifest(o.labels)) manifest[e.painting_id] = e;
  }
  std::optional<Split> fit_split;
  if (!o.labels.empty() && o.fit_split != "all") {
    try {
      fit_split = parse_split(o.fit_split);
    } catch (const DataError &e) {
      throw UsageError(e.what());
    }
  }

  struct Joined {
    const ResultRow *a;
    const ResultRow *b;
    std::optional<Label> label;
    std::optional<Split> split;
  };
  std::vector<Joined> joined;
  for (const auto &ra : rows_a) {
    const auto it = by_id_b.find(ra.painting_id);
    if (it == by_id_b.end()) {
      throw DataError("painting " + ra.painting_id + " missing from " + o.results_b);
    }
    Joined j{&ra, it->second, ra.true_label, std::nullopt};
    if (const auto m = manifest.find(ra.painting_id); m != manifest.end()) {
      j.label = m->second.label;
      j.split = m->second.split;
    }
    joined.push_back(j);
  }
  if (joined.size() != rows_b.size()) {
    throw DataError("results tables list different paintings");
  }

  std::vector<EnsembleSample> fit;
  for (const auto &j : joined) {
    if (!j.label) continue;
    if (fit_split && j.split != fit_split) continue;
    fit.push_back(EnsembleSample{j.a->mean_prob, j.b->mean_prob, *j.label});
  }
  if (fit.empty()) throw DataError("no labeled paintings available to fit ensemble weights");
  const EnsembleWeights weights = optimize_weights(fit);

  std::vector<PaintingResult> combined;
  for (const auto &j : joined) {
    PaintingResult r;
    r.painting_id = j.a->painting_id;
    r.mean_prob = combine(j.a->mean_prob, j.b->mean_prob, weights);
    r.predicted = decide(r.mean_prob);
    r.true_label = j.label;
    r.tiles_kept = j.a->tiles_kept + j.b->tiles_kept;
    r.tiles_total = j.a->tiles_total + j.b->tiles_total;
    combined.push_back(std::move(r));
  }
  emit(o.out, out, [&](std::ostream &s) {
    s << "# w\t" << std::fixed << std::setprecision(2) << weights.w << "\n# objective\t"
      << std::setprecision(6) << weights.achieved_error << "\n# misclassified\t"
      << weights.misclassified << "\n# fitted_on\t" << fit.size() << '\n';
    write_results_table(s, combined);
  });
  out << "w\t" << std::fixed << std::setprecision(2) << weights.w << "\nobjective\t"
      << std::setprecision(6) << weights.achieved_error << "\nmisclassified\t"
      << weights.misclassified << '\n';
  err << "fitted ensemble weight on " << fit.size() << " paintings\n";
  return kOk;
}

int cmd_gradcam(const GradcamOptions &o, std::ostream &out, std::ostream &err) {
  const CnnModel model = load_model(o.model);
  const int size = model.config().input_size;
  const ImageBuffer img = load_image(o.image);
  require_channels(model, img, o.image);
  if (img.width() < size || img.height() < size) {
    throw DataError("image " + o.image + " is smaller than the model tile size " +
                    std::to_string(size));
  }
  const int x = o.x >= 0 ? o.x : (img.width() - size) / 2;
  const int y = o.y >= 0 ? o.y : (img.height() - size) / 2;
  if (x + size > img.width() || y + size > img.height()) {
    throw UsageError("tile offset places the tile outside the image");
  }
  const auto tensor = tile_tensor(img, x, y, size);
  const HeatMap map = gradcam(model, tensor);

  ImageBuffer tile(size, size, img.channels());
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      for (int ch = 0; ch < img.channels(); ++ch) tile.at(c, r, ch) = img.at(x + c, y + r, ch);
    }
  }
  write_png(render_heatmap(map, o.alpha > 0.0 ? &tile : nullptr, o.alpha), o.out);
  if (!o.raw.empty()) {
    emit(o.raw, out, [&](std::ostream &s) {
      s << "# x\ty\tweight\n" << std::fixed << std::setprecision(6);
      for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) s << c << '\t' << r << '\t' << map.at(c, r) << '\n';
      }
    });
  }
  out << "probability\t" << std::fixed << std::setprecision(4) << forward(model, tensor) << '\n';
  err << "heat map written to " << o.out << '\n';
  return kOk;
}

// Global options plus those of the selected subcommand, one `key=value` per line.
void log_resolved_config(const CLI::App &app, std::ostream &err) {
  std::string prefix;
  for (const auto *sub : app.get_subcommands()) prefix = sub->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  err << "# resolved configuration\n";
  for (std::string line; std::getline(all, line);) {
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    const bool global = dot == std::string::npos || dot > eq;
    if (global || line.rfind(prefix, 0) == 0) err << line << '\n';
  }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Entropy-sieved tile classification of artwork images"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Read `key = value` flag defaults from a file");

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker thread cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("-v,--verbose", g.verbosity, "More logging");

  EntropyOptions eo;
  auto *entropy = app.add_subcommand("entropy", "Print the luma entropy of an image in bits");
  entropy->add_option("image", eo.image, "PNG/PGM/PPM image")->required();

  TileOptions to;
  auto *tile = app.add_subcommand("tile", "Tile an image and apply the entropy sieve");
  tile->add_option("image", to.image, "PNG/PGM/PPM image")->required();
  tile->add_option("--size", to.size, "Tile side in pixels")->capture_default_str();
  tile->add_option("--stride", to.stride, "Tile stride (default size/2)");
  tile->add_option("--out", to.out, "Tile manifest path (default stdout)");

  SynthOptions so;
  auto *synth = app.add_subcommand("synth", "Generate a synthetic two-style corpus");
  synth->add_option("--out", so.out_dir, "Output directory")->required();
  synth->add_option("--n", so.per_class, "Paintings per class")->capture_default_str();
  synth->add_option("--width", so.width)->capture_default_str();
  synth->add_option("--height", so.height)->capture_default_str();
  synth->add_option("--orientation-a", so.orientation_a, "Stroke angle of the positive style")
      ->capture_default_str();
  synth->add_option("--orientation-b", so.orientation_b, "Stroke angle of the negative style")
      ->capture_default_str();
  synth->add_option("--noise", so.noise, "Noise amplitude")->capture_default_str();
  synth->add_option("--strokes", so.strokes, "Strokes per painting (default scales with area)");

  TrainOptions tr;
  auto *trainc = app.add_subcommand("train", "Train a tile classifier from a manifest");
  trainc->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
  trainc->add_option("--size", tr.size, "Tile side in pixels")->capture_default_str();
  trainc->add_option("--stride", tr.stride, "Tile stride (default size/2)");
  trainc->add_option("--filters", tr.filters, "Filters per conv stage")
      ->delimiter(',')
      ->capture_default_str();
  trainc->add_option("--kernel", tr.kernel, "Conv kernel size")->capture_default_str();
  trainc->add_flag("--no-pool", tr.no_pool, "Disable 2x2 max pooling");
  trainc->add_option("--dense", tr.dense, "Hidden dense units")->capture_default_str();
  trainc->add_option("--lr", tr.learning_rate, "Learning rate")->capture_default_str();
  trainc->add_option("--momentum", tr.momentum)->capture_default_str();
  trainc->add_option("--epochs", tr.epochs)->capture_default_str();
  trainc->add_option("--batch", tr.batch)->capture_default_str();
  trainc->add_option("--out", tr.out, "Model file")->required();
  trainc->add_option("--metrics", tr.metrics, "Per-epoch metrics (default <out>.metrics.tsv)");

  ClassifyOptions co;
  auto *classify = app.add_subcommand("classify", "Painting-level classification");
  classify->add_option("--model", co.model)->required();
  classify->add_option("images", co.images, "Images to classify");
  classify->add_option("--manifest", co.manifest, "Classify labeled manifest entries instead");
  classify->add_option("--split", co.splits, "Manifest splits: train,val,test or all")
      ->delimiter(',')
      ->capture_default_str();
  classify->add_option("--stride", co.stride, "Tile stride (default size/2)");
  classify->add_option("--out", co.out, "Results table (default stdout)");

  MapOptions mo;
  auto *mapc = app.add_subcommand("map", "Render a region-level probability map");
  mapc->add_option("--model", mo.model)->required();
  mapc->add_option("image", mo.image)->required();
  mapc->add_option("--stride", mo.stride, "Tile stride (default size/2)");
  mapc->add_option("--alpha", mo.alpha, "Overlay opacity")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  mapc->add_flag("--no-overlay", mo.no_overlay, "Render bands without the source image");
  mapc->add_option("--out", mo.out, "Rendered PNG")->required();
  mapc->add_option("--raw", mo.raw, "Raw per-pixel map (default <out>.tsv)");
  mapc->add_option("--legend", mo.legend, "Legend sidecar (default <out>.legend.txt)");

  EnsembleOptions en;
  auto *ensemble = app.add_subcommand("ensemble", "Fit two-scale ensemble weights");
  ensemble->add_option("--resultsA", en.results_a, "Results table of model A")->required();
  ensemble->add_option("--resultsB", en.results_b, "Results table of model B")->required();
  ensemble->add_option("--labels", en.labels, "Manifest supplying labels and splits");
  ensemble->add_option("--fit-split", en.fit_split, "Split used to fit the weight, or all")
      ->capture_default_str();
  ensemble->add_option("--out", en.out, "Combined results table")->required();

  GradcamOptions gc;
  auto *gradcamc = app.add_subcommand("gradcam", "Grad-CAM heat map of one tile");
  gradcamc->add_option("--model", gc.model)->required();
  gradcamc->add_option("image", gc.image, "Tile image (larger images are cropped)")->required();
  gradcamc->add_option("--x", gc.x, "Tile left offset (default centered)");
  gradcamc->add_option("--y", gc.y, "Tile top offset (default centered)");
  gradcamc->add_option("--alpha", gc.alpha, "Blend heat map over the tile")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gradcamc->add_option("--out", gc.out, "Heat-map PNG")->required();
  gradcamc->add_option("--raw", gc.raw, "Raw heat-map values");

  std::vector<std::string> argv_storage = {"tilesieve"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    set_max_threads(g.threads);
    log_resolved_config(app, err);
    if (entropy->parsed()) return cmd_entropy(eo, out);
    if (tile->parsed()) return cmd_tile(to, g, out, err);
    if (synth->parsed()) return cmd_synth(so, g, out);
    if (trainc->parsed()) return cmd_train(tr, g, out, err);
    if (classify->parsed()) return cmd_classify(co, out, err);
    if (mapc->parsed()) return cmd_map(mo, out, err);
    if (ensemble->parsed()) return cmd_ensemble(en, out, err);
    if (gradcamc->parsed()) return cmd_gradcam(gc, out, err);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError &e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

int run(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace tilesieve::cli
