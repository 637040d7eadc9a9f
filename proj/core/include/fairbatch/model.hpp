#pragma once

#include <span>
#include <string>
#include <vector>

#include "fairbatch/dataset.hpp"

namespace fairbatch {

/// Linear classifier parameters. Binary models (n_y == 2) hold a single
/// k-weight row and one bias and predict through a sigmoid; models with
/// n_y > 2 hold an n_y x k weight matrix plus per-class biases and predict
/// through a softmax.
struct ModelParams {
  std::vector<double> weights;  // row-major, rows() * k
  std::vector<double> bias;     // rows()
  std::size_t k = 0;
  int n_y = 2;

  std::size_t rows() const { return n_y > 2 ? static_cast<std::size_t>(n_y) : 1; }
  bool multiclass() const { return n_y > 2; }

  static ModelParams zeros(std::size_t k, int n_y = 2);
};

/// Gradient of a loss w.r.t. ModelParams; same shapes.
struct Gradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Adam optimizer state. Moment accumulators match the parameter shapes.
struct AdamState {
  std::vector<double> m_w, v_w;
  std::vector<double> m_b, v_b;
  std::uint64_t t = 0;
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const ModelParams& p, double lr = 0.005);
};

enum class LossKind { binary_cross_entropy, zero_one };

/// zero_one is evaluation-only: gradient requests against it throw.
struct LossSpec {
  LossKind kind = LossKind::binary_cross_entropy;
};

/// Predicted probability of class 1 for a binary model (sigmoid(w.x + b)).
/// Throws for multiclass models; use predict_dist there.
double predict_proba(const ModelParams& p, std::span<const double> x);

/// Full predictive distribution: {1-q, q} for binary, softmax for multiclass.
std::vector<double> predict_dist(const ModelParams& p, std::span<const double> x);

/// Hard prediction. Binary: class 1 iff q > 0.5 (exact ties go to class 0);
/// multiclass: argmax with lowest-index tie-break.
int predict_class(const ModelParams& p, std::span<const double> x);

/// Per-example loss. BCE clamps probabilities to [1e-12, 1 - 1e-12] so the
/// value stays finite for any finite parameters.
double example_loss(const ModelParams& p, std::span<const double> x, int y,
                    const LossSpec& spec);

/// Mean BCE gradient over the given rows. Throws on an empty batch and on a
/// zero-one spec.
Gradient batch_gradient(const ModelParams& p, std::span<const std::size_t> rows,
                        const Dataset& d,
                        const LossSpec& spec = {LossKind::binary_cross_entropy});

/// One bias-corrected Adam update. Pure: returns the new (params, state)
/// pair and leaves the inputs untouched.
std::pair<ModelParams, AdamState> adam_step(const ModelParams& p,
                                            const AdamState& s,
                                            const Gradient& g);

/// Checkpoint JSON: {"weights": [...], "bias": ..., "n_y": ..., "k": ...}.
/// Values round-trip at full double precision.
std::string checkpoint_to_json(const ModelParams& p);
ModelParams checkpoint_from_json(const std::string& text);
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace fairbatch
