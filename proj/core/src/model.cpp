#include "fairbatch/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fairbatch {

namespace {
constexpr double kProbClamp = 1e-12;

double clamp_prob(double q) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, q));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_example(const ModelParams& p, std::span<const double> x, int y) {
  if (x.size() != p.k)
    throw std::invalid_argument("model: feature length does not match k");
  if (y < 0 || y >= p.n_y)
    throw std::invalid_argument("model: label out of range");
}
}  // namespace

ModelParams ModelParams::zeros(std::size_t k, int n_y) {
  if (n_y < 2) throw std::invalid_argument("ModelParams: n_y must be >= 2");
  ModelParams p;
  p.k = k;
  p.n_y = n_y;
  p.weights.assign(p.rows() * k, 0.0);
  p.bias.assign(p.rows(), 0.0);
  return p;
}

AdamState AdamState::init(const ModelParams& p, double lr) {
  AdamState s;
  s.lr = lr;
  s.m_w.assign(p.weights.size(), 0.0);
  s.v_w.assign(p.weights.size(), 0.0);
  s.m_b.assign(p.bias.size(), 0.0);
  s.v_b.assign(p.bias.size(), 0.0);
  return s;
}

double predict_proba(const ModelParams& p, std::span<const double> x) {
  if (p.multiclass())
    throw std::invalid_argument("predict_proba: model is multiclass, use predict_dist");
  if (x.size() != p.k)
    throw std::invalid_argument("model: feature length does not match k");
  double t = p.bias[0];
  for (std::size_t j = 0; j < p.k; ++j) t += p.weights[j] * x[j];
  return sigmoid(t);
}

std::vector<double> predict_dist(const ModelParams& p, std::span<const double> x) {
  if (!p.multiclass()) {
    const double q = predict_proba(p, x);
    return {1.0 - q, q};
  }
  if (x.size() != p.k)
    throw std::invalid_argument("model: feature length does not match k");
  std::vector<double> logits(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double t = p.bias[r];
    const double* w = p.weights.data() + r * p.k;
    for (std::size_t j = 0; j < p.k; ++j) t += w[j] * x[j];
    logits[r] = t;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& t : logits) {
    t = std::exp(t - mx);
    total += t;
  }
  for (double& t : logits) t /= total;
  return logits;
}

int predict_class(const ModelParams& p, std::span<const double> x) {
  if (!p.multiclass()) return predict_proba(p, x) > 0.5 ? 1 : 0;
  const std::vector<double> q = predict_dist(p, x);
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

double example_loss(const ModelParams& p, std::span<const double> x, int y,
                    const LossSpec& spec) {
  check_example(p, x, y);
  if (spec.kind == LossKind::zero_one) return predict_class(p, x) == y ? 0.0 : 1.0;
  if (!p.multiclass()) {
    const double q = clamp_prob(predict_proba(p, x));
    return y == 1 ? -std::log(q) : -std::log(1.0 - q);
  }
  const std::vector<double> q = predict_dist(p, x);
  return -std::log(clamp_prob(q[y]));
}

Gradient batch_gradient(const ModelParams& p, std::span<const std::size_t> rows,
                        const Dataset& d, const LossSpec& spec) {
  if (rows.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  if (spec.kind == LossKind::zero_one)
    throw std::invalid_argument("batch_gradient: zero-one loss has no gradient");
  if (d.k != p.k)
    throw std::invalid_argument("batch_gradient: dataset/model width mismatch");

  Gradient g;
  g.weights.assign(p.weights.size(), 0.0);
  g.bias.assign(p.bias.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(rows.size());

  for (std::size_t r : rows) {
    const auto x = d.row(r);
    const int y = d.labels[r];
    check_example(p, x, y);
    if (!p.multiclass()) {
      const double err = predict_proba(p, x) - static_cast<double>(y);
      for (std::size_t j = 0; j < p.k; ++j) g.weights[j] += err * x[j] * inv_b;
      g.bias[0] += err * inv_b;
    } else {
      const std::vector<double> q = predict_dist(p, x);
      for (std::size_t c = 0; c < p.rows(); ++c) {
        const double err = q[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
        double* gw = g.weights.data() + c * p.k;
        for (std::size_t j = 0; j < p.k; ++j) gw[j] += err * x[j] * inv_b;
        g.bias[c] += err * inv_b;
      }
    }
  }
  return g;
}

std::pair<ModelParams, AdamState> adam_step(const ModelParams& p,
                                            const AdamState& s,
                                            const Gradient& g) {
  if (g.weights.size() != p.weights.size() || g.bias.size() != p.bias.size() ||
      s.m_w.size() != p.weights.size() || s.m_b.size() != p.bias.size())
    throw std::invalid_argument("adam_step: shape mismatch");

  ModelParams np = p;
  AdamState ns = s;
  ns.t = s.t + 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(ns.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(ns.t));

  auto update = [&](std::vector<double>& theta, std::vector<double>& m,
                    std::vector<double>& v, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
  };
  update(np.weights, ns.m_w, ns.v_w, g.weights);
  update(np.bias, ns.m_b, ns.v_b, g.bias);
  return {std::move(np), std::move(ns)};
}

std::string checkpoint_to_json(const ModelParams& p) {
  nlohmann::json j;
  if (!p.multiclass()) {
    j["weights"] = p.weights;
    j["bias"] = p.bias[0];
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < p.rows(); ++r)
      rows.push_back(std::vector<double>(p.weights.begin() + r * p.k,
                                         p.weights.begin() + (r + 1) * p.k));
    j["weights"] = rows;
    j["bias"] = p.bias;
  }
  j["n_y"] = p.n_y;
  j["k"] = p.k;
  return j.dump();
}

ModelParams checkpoint_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ModelParams p;
  p.n_y = j.at("n_y").get<int>();
  p.k = j.at("k").get<std::size_t>();
  if (p.n_y <= 2) {
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = {j.at("bias").get<double>()};
  } else {
    for (const auto& row : j.at("weights")) {
      const auto w = row.get<std::vector<double>>();
      p.weights.insert(p.weights.end(), w.begin(), w.end());
    }
    p.bias = j.at("bias").get<std::vector<double>>();
  }
  if (p.weights.size() != p.rows() * p.k || p.bias.size() != p.rows())
    throw std::runtime_error("checkpoint: shape fields inconsistent with data");
  return p;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  out << checkpoint_to_json(p) << '\n';
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

}  // namespace fairbatch
