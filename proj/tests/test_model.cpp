#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fairbatch/model.hpp"
#include "fairbatch/rng.hpp"

using namespace fairbatch;

namespace {

ModelParams binary_model(std::vector<double> w, double b) {
  ModelParams p;
  p.k = w.size();
  p.n_y = 2;
  p.weights = std::move(w);
  p.bias = {b};
  return p;
}

Dataset one_feature_rows(const std::vector<double>& xs,
                         const std::vector<int>& ys) {
  Dataset d;
  d.k = 1;
  d.features = xs;
  d.labels = ys;
  d.sensitive.assign(ys.size(), 0);
  return d;
}

constexpr LossSpec kBce{LossKind::binary_cross_entropy};
constexpr LossSpec kZeroOne{LossKind::zero_one};

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("predict_proba closed forms") {
  const std::vector<double> x0{3.0, -1.0};
  CHECK(predict_proba(binary_model({0, 0}, 0), x0) == 0.5);
  const std::vector<double> x1{0.0, 5.0};
  CHECK(predict_proba(binary_model({1, 0}, 0), x1) == 0.5);
  const std::vector<double> x2{1.0, 1.0};
  CHECK(predict_proba(binary_model({1, 1}, 0), x2) ==
        doctest::Approx(0.8807970779778823).epsilon(1e-12));
}

TEST_CASE("example_loss closed forms and tie-break") {
  const ModelParams p = binary_model({0.0}, 0.0);  // q = 0.5 everywhere
  const std::vector<double> x{1.0};
  CHECK(example_loss(p, x, 1, kBce) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
  // exact 0.5 predicts class 0, so the zero-one loss of y=1 is 1
  CHECK(example_loss(p, x, 1, kZeroOne) == 1.0);
  CHECK(example_loss(p, x, 0, kZeroOne) == 0.0);

  const ModelParams confident = binary_model({10.0}, 0.0);
  CHECK(example_loss(confident, x, 1, kZeroOne) == 0.0);
}

TEST_CASE("bce stays finite under extreme parameters") {
  const ModelParams p = binary_model({1e6}, 1e6);
  const std::vector<double> x{1.0};
  const double loss = example_loss(p, x, 0, kBce);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
}

TEST_CASE("batch gradient closed form and duplicate invariance") {
  const ModelParams p = binary_model({0, 0}, 0);
  Dataset d;
  d.k = 2;
  d.features = {1.0, 0.0};
  d.labels = {1};
  d.sensitive = {0};
  const std::vector<std::size_t> rows{0};
  const Gradient g = batch_gradient(p, rows, d);
  CHECK(g.weights[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(g.weights[1] == 0.0);
  CHECK(g.bias[0] == doctest::Approx(-0.5).epsilon(1e-15));

  const std::vector<std::size_t> dup{0, 0};
  const Gradient g2 = batch_gradient(p, dup, d);
  CHECK(g2.weights[0] == doctest::Approx(g.weights[0]).epsilon(1e-15));
  CHECK(g2.bias[0] == doctest::Approx(g.bias[0]).epsilon(1e-15));
}

TEST_CASE("batch gradient error paths") {
  const ModelParams p = binary_model({0.0}, 0.0);
  const Dataset d = one_feature_rows({1.0}, {1});
  const std::vector<std::size_t> empty;
  CHECK_THROWS_AS(batch_gradient(p, empty, d), std::invalid_argument);
  const std::vector<std::size_t> rows{0};
  CHECK_THROWS_AS(batch_gradient(p, rows, d, kZeroOne), std::invalid_argument);
}

TEST_CASE("batch gradient matches central finite differences") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.next_below(4);
    const std::size_t n = 1 + rng.next_below(6);
    Dataset d;
    d.k = k;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j)
        d.features.push_back(2.0 * rng.next_double() - 1.0);
      d.labels.push_back(int(rng.next_below(2)));
      d.sensitive.push_back(0);
    }
    ModelParams p;
    p.k = k;
    p.n_y = 2;
    for (std::size_t j = 0; j < k; ++j)
      p.weights.push_back(rng.next_normal() * 0.5);
    p.bias = {rng.next_normal() * 0.5};

    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    const Gradient g = batch_gradient(p, rows, d);

    const double h = 1e-5;
    const auto batch_loss = [&](const ModelParams& q) {
      double total = 0;
      for (std::size_t i : rows) total += example_loss(q, d.row(i), d.labels[i], kBce);
      return total / double(n);
    };
    for (std::size_t j = 0; j <= k; ++j) {
      ModelParams lo = p, hi = p;
      if (j < k) {
        lo.weights[j] -= h;
        hi.weights[j] += h;
      } else {
        lo.bias[0] -= h;
        hi.bias[0] += h;
      }
      const double fd = (batch_loss(hi) - batch_loss(lo)) / (2 * h);
      const double an = j < k ? g.weights[j] : g.bias[0];
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("adam zero gradient leaves parameters fixed") {
  const ModelParams p = binary_model({0.3, -0.7}, 0.1);
  const AdamState s = AdamState::init(p);
  Gradient g;
  g.weights = {0, 0};
  g.bias = {0};
  const auto [np, ns] = adam_step(p, s, g);
  CHECK(np.weights == p.weights);
  CHECK(np.bias == p.bias);
  CHECK(ns.t == 1);
}

TEST_CASE("adam is a pure function") {
  const ModelParams p = binary_model({0.5}, -0.2);
  AdamState s = AdamState::init(p);
  s.t = 3;
  s.m_w = {0.01};
  s.v_w = {0.002};
  s.m_b = {-0.03};
  s.v_b = {0.004};
  Gradient g;
  g.weights = {0.2};
  g.bias = {-0.1};
  const auto [p1, s1] = adam_step(p, s, g);
  const auto [p2, s2] = adam_step(p, s, g);
  CHECK(p1.weights == p2.weights);
  CHECK(s1.v_w == s2.v_w);
  CHECK(s1.t == 4);
}

TEST_CASE("adam step magnitude approaches lr under a constant gradient") {
  ModelParams p = binary_model({0.0}, 0.0);
  AdamState s = AdamState::init(p, 0.01);
  Gradient g;
  g.weights = {0.37};
  g.bias = {-0.11};
  double prev_w = p.weights[0];
  for (int i = 0; i < 400; ++i) {
    std::tie(p, s) = adam_step(p, s, g);
    if (i >= 399 - 5) {
      const double step = p.weights[0] - prev_w;
      CHECK(step < 0.0);  // moves against the positive gradient
      CHECK(std::abs(std::abs(step) - 0.01) < 1e-3);
    }
    prev_w = p.weights[0];
  }
  CHECK(p.bias[0] > 0.0);
}

TEST_CASE("adam shape mismatch is rejected") {
  const ModelParams p = binary_model({0.0, 0.0}, 0.0);
  const AdamState s = AdamState::init(p);
  Gradient g;
  g.weights = {0.0};
  g.bias = {0.0};
  CHECK_THROWS_AS(adam_step(p, s, g), std::invalid_argument);
}

TEST_CASE("multiclass softmax gradient matches finite differences") {
  Rng rng(55);
  Dataset d;
  d.k = 3;
  d.n_y = 4;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) d.features.push_back(rng.next_normal());
    d.labels.push_back(int(rng.next_below(4)));
    d.sensitive.push_back(0);
  }
  ModelParams p = ModelParams::zeros(3, 4);
  for (double& w : p.weights) w = 0.3 * rng.next_normal();
  for (double& b : p.bias) b = 0.3 * rng.next_normal();

  const std::vector<double> dist = predict_dist(p, d.row(0));
  double total = 0;
  for (double q : dist) total += q;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<std::size_t> rows{0, 1, 2, 3, 4};
  const Gradient g = batch_gradient(p, rows, d);
  const auto loss = [&](const ModelParams& q) {
    double acc = 0;
    for (std::size_t i : rows) acc += example_loss(q, d.row(i), d.labels[i], kBce);
    return acc / 5.0;
  };
  const double h = 1e-6;
  for (std::size_t idx : {std::size_t{0}, std::size_t{5}, std::size_t{11}}) {
    ModelParams lo = p, hi = p;
    lo.weights[idx] -= h;
    hi.weights[idx] += h;
    const double fd = (loss(hi) - loss(lo)) / (2 * h);
    CHECK(std::abs(fd - g.weights[idx]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("checkpoint json round-trips bit-exactly") {
  ModelParams p = binary_model({0.1234567890123456789, -3.14159e-7}, 1.0 / 3.0);
  const ModelParams back = checkpoint_from_json(checkpoint_to_json(p));
  CHECK(back.weights == p.weights);
  CHECK(back.bias == p.bias);
  CHECK(back.k == p.k);
  CHECK(back.n_y == p.n_y);

  const std::string path =
      (std::filesystem::temp_directory_path() / "fb_test_ckpt.json").string();
  save_checkpoint(p, path);
  const ModelParams loaded = load_checkpoint(path);
  CHECK(loaded.weights == p.weights);
  std::remove(path.c_str());
}

TEST_CASE("multiclass checkpoint round-trips") {
  ModelParams p = ModelParams::zeros(2, 3);
  Rng rng(17);
  for (double& w : p.weights) w = rng.next_normal();
  for (double& b : p.bias) b = rng.next_normal();
  const ModelParams back = checkpoint_from_json(checkpoint_to_json(p));
  CHECK(back.weights == p.weights);
  CHECK(back.bias == p.bias);
  CHECK(back.rows() == 3);
}

TEST_SUITE_END();
