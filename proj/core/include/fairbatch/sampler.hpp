#pragma once

#include <functional>
#include <vector>

#include "fairbatch/dataset.hpp"
#include "fairbatch/metrics.hpp"
#include "fairbatch/rng.hpp"

namespace fairbatch {

enum class Fairness { eqopp, eqodds, dp };

/// Fairness target driving the sampler, plus the no-update band: the
/// selected loss gap must exceed `threshold` in absolute value before a
/// lambda step is taken (threshold 0 keeps every non-tie update).
struct FairnessCriterion {
  Fairness kind = Fairness::eqopp;
  double threshold = 0.0;
};

/// Outer optimization variable: lambda in the box [0, upper_1] x ... x
/// [0, upper_d], stepped by +-alpha and clamped after every update.
struct LambdaState {
  std::vector<double> lambda;
  std::vector<double> upper;
  double alpha = 0.005;

  std::size_t dim() const { return lambda.size(); }
  void clamp();
};

/// Minibatch sampling distribution: a probability per (y,z) sampling set and
/// a weight per member within each set (uniform unless reweighted). The
/// implied per-example probability is p_i = set_prob[cell] * member_weight.
struct SamplingDistribution {
  int n_y = 0;
  int n_z = 0;
  std::vector<double> set_probs;                   // indexed y * n_z + z
  std::vector<std::vector<std::size_t>> members;   // row ids per set
  std::vector<std::vector<double>> member_weights; // sums to 1 within a set
  std::size_t total = 0;

  /// p_i for every row of the underlying dataset; sums to 1.
  std::vector<double> example_probs() const;
};

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
  std::size_t batch_size = 0;
  std::size_t batches_per_epoch = 0;
};

enum class BatchComposition {
  iid,           // draw set then member, i.i.d. with replacement
  exact_counts,  // fixed per-set counts: largest-remainder rounding of b * set_prob
};

/// Signed per-dimension loss gap, the raw material of the i* update rule.
struct DimensionDisparity {
  std::size_t dim = 0;
  double delta = 0.0;
};

/// Lambda placement that makes the induced example distribution exactly
/// uniform: eqopp -> d=1, lambda = m_{1,0}/m with bound m_{1,*}/m;
/// eqodds -> d=2, lambda = (m_{0,0}/m, m_{1,0}/m) with bounds
/// (m_{0,*}/m, m_{1,*}/m); dp -> d=2, lambda = (m_{0,0}/m, m_{0,1}/m) with
/// bounds (m_{*,0}/m, m_{*,1}/m). Requires binary alphabets with the
/// adjusted cells nonempty.
LambdaState init_lambda(const FairnessCriterion& criterion, const GroupIndex& gi,
                        double alpha);

/// Set probabilities induced by lambda:
///   eqopp:  (1,0) = lambda, (1,1) = m_{1,*}/m - lambda, (0,z) = m_{0,z}/m
///   eqodds: (0,0) = l1, (0,1) = m_{0,*}/m - l1, (1,0) = l2, (1,1) = m_{1,*}/m - l2
///   dp:     (0,0) = l1, (1,0) = m_{*,0}/m - l1, (0,1) = l2, (1,1) = m_{*,1}/m - l2
/// Members are drawn uniformly within a set.
SamplingDistribution sampling_distribution(const LambdaState& ls,
                                           const FairnessCriterion& criterion,
                                           const GroupIndex& gi);

/// Uniform distribution over all examples (the plain-SGD baseline).
SamplingDistribution uniform_distribution(const GroupIndex& gi);

/// Draws num_batches batches of size b. In iid mode every element is an
/// independent set-then-member draw; exact_counts fixes per-set counts by
/// largest-remainder rounding. Throws if a set with positive probability has
/// no members.
BatchPlan draw_epoch(const SamplingDistribution& sd, std::size_t b,
                     std::size_t num_batches, Rng& rng,
                     BatchComposition composition = BatchComposition::iid);

/// One signed-gradient step on lambda from the epoch's loss table.
///
/// eqopp reads the (1,0) vs (1,1) gap of a table built from the training
/// criterion; eqodds compares the per-class gaps d_{y=0}, d_{y=1} and steps
/// only the dimension with the larger magnitude; dp expects the table from
/// dp_update_losses and uses the inverted step sign on the y=0 dimension.
/// No update when the selected gap's magnitude is within the criterion
/// threshold. The result is clamped into the box.
LambdaState update_lambda(const LambdaState& ls, const FairnessCriterion& criterion,
                          const GroupLossTable& t);

/// i* rule over an explicit objective list: steps the dimension whose |delta|
/// is largest by alpha * sign(delta), skipping gaps within the threshold.
LambdaState update_lambda(const LambdaState& ls,
                          const std::vector<DimensionDisparity>& objectives,
                          double threshold = 0.0);

/// Per-dimension signed disparities for n_z >= 2: adjacent within-class
/// differences L_{y,j} - L_{y,j+1}. For eqopp only the y=1 class is scanned;
/// otherwise the class with the largest adjacent gap is selected and its
/// n_z - 1 differences are returned (dimensions are numbered
/// y * (n_z - 1) + j).
std::vector<DimensionDisparity> multigroup_objectives(
    const GroupLossTable& t, const FairnessCriterion& criterion);

/// Reweights members within each set by their loss rank: weight proportional
/// to 1 / rank^temperature with ties sharing their average rank, renormalized
/// per set. Set probabilities are unchanged, so the fairness behavior of the
/// sampler is preserved while high-loss examples are drawn more often.
SamplingDistribution loss_weighted_within_group(
    const SamplingDistribution& sd, std::span<const double> example_losses,
    double temperature);

/// Evaluation of the two inner objectives at a given lambda; used by the
/// 1-D signed-gradient driver.
using InnerEval = std::function<std::pair<double, double>(double)>;

/// lambda_{t+1} = clamp(lambda_t - alpha * sign(g1(w_l) - f1(w_l))) on
/// [0, upper]; sign(0) makes no move. Returns the whole trajectory,
/// lambda_0 first (steps + 1 entries).
std::vector<double> signed_gd_1d(const InnerEval& f_eval, double lambda0,
                                 double alpha, std::size_t steps, double upper);

}  // namespace fairbatch
