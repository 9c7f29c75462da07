#include "oracles.hpp"
#include "test_support.hpp"

#include "tilesieve/cnn.hpp"
#include "tilesieve/error.hpp"
#include "tilesieve/parallel.hpp"
#include "tilesieve/training.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace tilesieve;

namespace {

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

CnnConfig tiny_config() {
  CnnConfig cfg;
  cfg.input_size = 12;
  cfg.input_channels = 1;
  cfg.conv_layers = {{4, 3, Pool::max2}};
  cfg.dense_units = 8;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  return cfg;
}

// Bright tiles are positive, dark tiles negative.
TileDataset brightness_dataset(Rng &rng, int per_class, int size) {
  TileDataset ds;
  ds.tile_size = size;
  ds.channels = 1;
  for (int i = 0; i < 2 * per_class; ++i) {
    const bool bright = i % 2 == 0;
    TileSample s;
    s.pixels.resize(static_cast<std::size_t>(size) * size);
    for (auto &v : s.pixels) {
      v = static_cast<float>(bright ? rng.uniform(0.6, 1.0) : rng.uniform(0.0, 0.4));
    }
    s.label = bright ? Label::positive : Label::negative;
    s.painting_id = "P" + std::to_string(i);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

} // namespace

TEST_CASE("default architecture shapes") {
  const NetworkShape shape = NetworkShape::from_config(CnnConfig{});
  REQUIRE(shape.stages.size() == 2);
  CHECK(shape.stages[0].conv_size == 98);
  CHECK(shape.stages[0].out_size == 49);
  CHECK(shape.stages[1].conv_size == 47);
  CHECK(shape.stages[1].out_size == 23);
  CHECK(shape.flat_size == 16 * 23 * 23);
  CHECK(shape.param_count == (8 * 3 * 9 + 8) + (16 * 8 * 9 + 16) + (32 * 8464 + 32) + 32 + 1);
}

TEST_CASE("init_model") {
  CnnConfig cfg = tiny_config();
  cfg.seed = 99;
  const CnnModel a = init_model(cfg);
  const CnnModel b = init_model(cfg);
  CHECK(bitwise_equal(a.weights(), b.weights()));
  cfg.seed = 100;
  CHECK_FALSE(bitwise_equal(a.weights(), init_model(cfg).weights()));
  for (const double v : a.tensor("conv1.bias")) CHECK(v == 0.0);
  for (const double v : a.tensor("dense.bias")) CHECK(v == 0.0);

  // He scale: conv1 fan-in 9, so the sample spread should be near sqrt(2/9).
  CnnConfig wide = tiny_config();
  wide.conv_layers = {{200, 3, Pool::max2}};
  const CnnModel wide_model = init_model(wide);
  const auto w = wide_model.tensor("conv1.weight");
  double sq = 0.0;
  for (const double v : w) sq += v * v;
  CHECK(std::sqrt(sq / w.size()) == doctest::Approx(std::sqrt(2.0 / 9.0)).epsilon(0.1));
}

TEST_CASE("configs whose spatial size collapses are rejected") {
  CnnConfig cfg = tiny_config();
  cfg.input_size = 8;
  cfg.conv_layers = {{4, 7, Pool::max2}, {4, 7, Pool::max2}};
  CHECK_THROWS_AS(init_model(cfg), UsageError);
  cfg.conv_layers = {{4, 9, Pool::none}};
  CHECK_THROWS_AS(init_model(cfg), UsageError);
  cfg.conv_layers = {{4, 3, Pool::max2}};
  cfg.dense_units = 0;
  CHECK_THROWS_AS(init_model(cfg), UsageError);
}

TEST_CASE("forward") {
  SUBCASE("all-zero weights give 0.5") {
    CnnModel m = init_model(tiny_config());
    for (auto &w : m.weights()) w = 0.0;
    Rng rng(1);
    CHECK(forward(m, oracle::random_tile(rng, m)) == 0.5);
  }
  SUBCASE("outputs stay inside (0, 1) and repeated calls agree") {
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
      const CnnModel m = oracle::random_small_model(rng);
      const auto tile = oracle::random_tile(rng, m);
      const double p = forward(m, tile);
      CHECK(p > 0.0);
      CHECK(p < 1.0);
      CHECK(forward(m, tile) == p);
    }
  }
  SUBCASE("hand-computed 2x2 filter on a 3x3 tile") {
    CnnConfig cfg;
    cfg.input_size = 3;
    cfg.input_channels = 1;
    cfg.conv_layers = {{1, 2, Pool::none}};
    cfg.dense_units = 1;
    CnnModel m(cfg, std::vector<double>(NetworkShape::from_config(cfg).param_count));
    const std::vector<double> kernel = {1.0, -1.0, 0.5, 2.0};
    std::copy(kernel.begin(), kernel.end(), m.tensor("conv1.weight").begin());
    m.tensor("conv1.bias")[0] = -0.5;
    const std::vector<double> dense = {0.3, -0.2, 0.5, 0.1};
    std::copy(dense.begin(), dense.end(), m.tensor("dense.weight").begin());
    m.tensor("dense.bias")[0] = -0.05;
    m.tensor("out.weight")[0] = 1.5;
    m.tensor("out.bias")[0] = -0.2;
    const std::vector<float> tile = {0.125f, 0.25f, 0.375f, 0.5f, 0.625f,
                                     0.75f,  0.875f, 1.0f,  0.0f};
    // conv: 0.875, 1.1875, 1.8125, relu(-0.125) = 0; dense: 0.88125;
    // logit 1.5 * 0.88125 - 0.2 = 1.121875.
    CHECK(forward_logit(m, tile) == doctest::Approx(1.121875).epsilon(1e-15));
    CHECK(forward(m, tile) == doctest::Approx(0.7543363440441602).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    const CnnModel m = init_model(tiny_config());
    CHECK_THROWS_AS(forward(m, std::vector<float>(10)), UsageError);
  }
}

TEST_CASE("loss_and_gradients") {
  SUBCASE("prediction 0.5 with label 1 costs ln 2") {
    CnnModel m = init_model(tiny_config());
    for (auto &w : m.weights()) w = 0.0;
    Rng rng(4);
    const auto tile = oracle::random_tile(rng, m);
    const Example ex{tile, 1.0};
    CHECK(loss_and_gradients(m, std::span(&ex, 1)).loss == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("labels must be 0 or 1") {
    const CnnModel m = init_model(tiny_config());
    Rng rng(4);
    const auto tile = oracle::random_tile(rng, m);
    const Example ex{tile, 0.5};
    CHECK_THROWS_AS(loss_and_gradients(m, std::span(&ex, 1)), UsageError);
    CHECK_THROWS_AS(loss_and_gradients(m, {}), UsageError);
  }
  SUBCASE("duplicating an example leaves the mean gradient unchanged") {
    Rng rng(5);
    const CnnModel m = oracle::random_small_model(rng);
    const auto tile = oracle::random_tile(rng, m);
    const std::vector<Example> one = {{tile, 1.0}};
    const std::vector<Example> two = {{tile, 1.0}, {tile, 1.0}};
    const auto g1 = loss_and_gradients(m, one);
    const auto g2 = loss_and_gradients(m, two);
    CHECK(g1.loss == g2.loss);
    CHECK(bitwise_equal(g1.gradients, g2.gradients));
  }
  SUBCASE("analytic gradients match central finite differences") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const CnnModel m = oracle::random_small_model(rng);
      std::vector<std::vector<float>> tiles;
      std::vector<double> labels;
      std::vector<Example> batch;
      const int n = 1 + static_cast<int>(rng.below(4));
      for (int i = 0; i < n; ++i) {
        tiles.push_back(oracle::random_tile(rng, m));
        labels.push_back(static_cast<double>(rng.below(2)));
      }
      for (int i = 0; i < n; ++i) batch.push_back(Example{tiles[i], labels[i]});
      const auto analytic = loss_and_gradients(m, batch);
      CHECK(analytic.loss == doctest::Approx(oracle::mean_loss(m, tiles, labels)).epsilon(1e-12));
      const auto numeric = oracle::finite_difference_gradient(m, tiles, labels);
      CHECK(oracle::max_relative_error(analytic.gradients, numeric) < 1e-3);
    }
  }
  SUBCASE("thread count does not change the result") {
    Rng rng(7);
    const CnnModel m = init_model(tiny_config());
    std::vector<std::vector<float>> tiles;
    std::vector<Example> batch;
    for (int i = 0; i < 9; ++i) tiles.push_back(oracle::random_tile(rng, m));
    for (int i = 0; i < 9; ++i) batch.push_back(Example{tiles[i], static_cast<double>(i % 2)});
    const auto serial = loss_and_gradients(m, batch);
    set_max_threads(4);
    const auto threaded = loss_and_gradients(m, batch);
    set_max_threads(1);
    CHECK(serial.loss == threaded.loss);
    CHECK(bitwise_equal(serial.gradients, threaded.gradients));
  }
}

TEST_CASE("train separates bright from dark tiles within 5 epochs") {
  Rng rng(10);
  const TileDataset train_set = brightness_dataset(rng, 20, 12);
  const TileDataset val_set = brightness_dataset(rng, 10, 12);
  const TrainResult r = train(init_model(tiny_config()), train_set, val_set);
  REQUIRE(r.history.size() == 5);
  bool reached = false;
  for (const auto &m : r.history) reached = reached || m.val_accuracy == 1.0;
  CHECK(reached);
  CHECK(tile_accuracy(r.model, val_set) == 1.0);
  CHECK(r.model.trained_epochs() == r.best_epoch);
}

TEST_CASE("best epoch selection prefers the earliest best validation accuracy") {
  Rng rng(10);
  const TileDataset train_set = brightness_dataset(rng, 20, 12);
  const TileDataset val_set = brightness_dataset(rng, 10, 12);
  CnnConfig cfg = tiny_config();
  cfg.epochs = 8;
  const TrainResult r = train(init_model(cfg), train_set, val_set);
  double best = -1.0;
  int expected = 0;
  for (const auto &m : r.history) {
    if (m.val_accuracy > best) {
      best = m.val_accuracy;
      expected = m.epoch;
    }
  }
  CHECK(r.best_epoch == expected);
}

TEST_CASE("learning rate 0 leaves weights unchanged") {
  Rng rng(11);
  const TileDataset ds = brightness_dataset(rng, 6, 12);
  CnnConfig cfg = tiny_config();
  cfg.learning_rate = 0.0;
  const CnnModel init = init_model(cfg);
  const TrainResult r = train(init, ds, ds);
  CHECK(bitwise_equal(r.model.weights(), init.weights()));
}

TEST_CASE("zero epochs return the initialization") {
  Rng rng(11);
  const TileDataset ds = brightness_dataset(rng, 6, 12);
  CnnConfig cfg = tiny_config();
  cfg.epochs = 0;
  const CnnModel init = init_model(cfg);
  const TrainResult r = train(init, ds, ds);
  CHECK(r.history.empty());
  CHECK(r.best_epoch == 0);
  CHECK(bitwise_equal(r.model.weights(), init.weights()));
}

TEST_CASE("training is reproducible across runs and thread counts") {
  Rng rng(12);
  const TileDataset train_set = brightness_dataset(rng, 10, 12);
  const TileDataset val_set = brightness_dataset(rng, 5, 12);
  CnnConfig cfg = tiny_config();
  cfg.epochs = 3;
  const TrainResult a = train(init_model(cfg), train_set, val_set);
  set_max_threads(3);
  const TrainResult b = train(init_model(cfg), train_set, val_set);
  set_max_threads(1);
  CHECK(bitwise_equal(a.model.weights(), b.model.weights()));
}

TEST_CASE("training loss falls on a memorizable 10-tile dataset") {
  Rng rng(13);
  TileDataset ds;
  ds.tile_size = 12;
  ds.channels = 1;
  for (int i = 0; i < 10; ++i) {
    TileSample s;
    s.pixels.resize(144);
    for (auto &v : s.pixels) v = static_cast<float>(rng.uniform());
    s.label = i % 2 ? Label::positive : Label::negative;
    ds.samples.push_back(std::move(s));
  }
  CnnConfig cfg = tiny_config();
  cfg.learning_rate = 0.005;
  cfg.epochs = 20;
  cfg.batch_size = 10;
  const CnnModel init = init_model(cfg);
  const double before = dataset_loss(init, ds);
  const TrainResult r = train(init, ds, ds);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  CHECK(dataset_loss(r.model, ds) < before);
}

TEST_CASE("train input validation") {
  Rng rng(14);
  const TileDataset ds = brightness_dataset(rng, 4, 12);
  const CnnModel m = init_model(tiny_config());
  CHECK_THROWS_AS(train(m, TileDataset{12, 1, {}, {}}, ds), DataError);
  TileDataset wrong = brightness_dataset(rng, 4, 10);
  CHECK_THROWS_AS(train(m, wrong, ds), DataError);

  CnnConfig hot = tiny_config();
  hot.learning_rate = 1e300;
  hot.momentum = 0.0;
  const auto msg = testing::what_of([&] { train(init_model(hot), ds, ds); });
  CHECK(msg.find("non-finite") != std::string::npos);
  CHECK(msg.find("epoch") != std::string::npos);
}
