#include "fairbatch/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairbatch {

namespace {

constexpr double kProbSlack = 1e-12;

double count_frac(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

void require_binary(const GroupIndex& gi, const char* who) {
  if (gi.n_y != 2 || gi.n_z != 2)
    throw std::invalid_argument(std::string(who) +
                                ": requires binary label and sensitive alphabets");
}

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace

void LambdaState::clamp() {
  for (std::size_t i = 0; i < lambda.size(); ++i)
    lambda[i] = std::min(upper[i], std::max(0.0, lambda[i]));
}

std::vector<double> SamplingDistribution::example_probs() const {
  std::vector<double> p(total, 0.0);
  for (std::size_t c = 0; c < members.size(); ++c)
    for (std::size_t j = 0; j < members[c].size(); ++j)
      p[members[c][j]] = set_probs[c] * member_weights[c][j];
  return p;
}

LambdaState init_lambda(const FairnessCriterion& criterion, const GroupIndex& gi,
                        double alpha) {
  require_binary(gi, "init_lambda");
  if (alpha < 0.0) throw std::invalid_argument("init_lambda: alpha must be >= 0");
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z)
      if (gi.m(y, z) == 0)
        throw std::invalid_argument("init_lambda: cell (y=" + std::to_string(y) +
                                    ", z=" + std::to_string(z) + ") is empty");
  const std::size_t m = gi.total;
  LambdaState ls;
  ls.alpha = alpha;
  switch (criterion.kind) {
    case Fairness::eqopp:
      ls.lambda = {count_frac(gi.m(1, 0), m)};
      ls.upper = {count_frac(gi.count_y[1], m)};
      break;
    case Fairness::eqodds:
      ls.lambda = {count_frac(gi.m(0, 0), m), count_frac(gi.m(1, 0), m)};
      ls.upper = {count_frac(gi.count_y[0], m), count_frac(gi.count_y[1], m)};
      break;
    case Fairness::dp:
      ls.lambda = {count_frac(gi.m(0, 0), m), count_frac(gi.m(0, 1), m)};
      ls.upper = {count_frac(gi.count_z[0], m), count_frac(gi.count_z[1], m)};
      break;
  }
  return ls;
}

namespace {

SamplingDistribution make_distribution(const GroupIndex& gi,
                                       std::vector<double> set_probs) {
  double total_prob = 0.0;
  for (double& p : set_probs) {
    if (p < 0.0) {
      if (p < -kProbSlack)
        throw std::logic_error("sampling_distribution: negative set probability");
      p = 0.0;
    }
    total_prob += p;
  }
  if (std::abs(total_prob - 1.0) > 1e-9)
    throw std::logic_error("sampling_distribution: set probabilities sum to " +
                           std::to_string(total_prob));

  SamplingDistribution sd;
  sd.n_y = gi.n_y;
  sd.n_z = gi.n_z;
  sd.set_probs = std::move(set_probs);
  sd.members = gi.cells;
  sd.total = gi.total;
  sd.member_weights.resize(sd.members.size());
  for (std::size_t c = 0; c < sd.members.size(); ++c)
    if (!sd.members[c].empty())
      sd.member_weights[c].assign(sd.members[c].size(),
                                  1.0 / static_cast<double>(sd.members[c].size()));
  return sd;
}

}  // namespace

SamplingDistribution sampling_distribution(const LambdaState& ls,
                                           const FairnessCriterion& criterion,
                                           const GroupIndex& gi) {
  require_binary(gi, "sampling_distribution");
  const std::size_t m = gi.total;
  std::vector<double> probs(4, 0.0);
  const auto id = [&](int y, int z) { return gi.cell_id(y, z); };
  switch (criterion.kind) {
    case Fairness::eqopp: {
      if (ls.dim() != 1)
        throw std::invalid_argument("sampling_distribution: eqopp expects d=1");
      const double l = ls.lambda[0];
      probs[id(1, 0)] = l;
      probs[id(1, 1)] = count_frac(gi.count_y[1], m) - l;
      // the y=0 mass is fixed and split across z proportionally to cell size
      probs[id(0, 0)] = count_frac(gi.m(0, 0), m);
      probs[id(0, 1)] = count_frac(gi.m(0, 1), m);
      break;
    }
    case Fairness::eqodds: {
      if (ls.dim() != 2)
        throw std::invalid_argument("sampling_distribution: eqodds expects d=2");
      probs[id(0, 0)] = ls.lambda[0];
      probs[id(0, 1)] = count_frac(gi.count_y[0], m) - ls.lambda[0];
      probs[id(1, 0)] = ls.lambda[1];
      probs[id(1, 1)] = count_frac(gi.count_y[1], m) - ls.lambda[1];
      break;
    }
    case Fairness::dp: {
      if (ls.dim() != 2)
        throw std::invalid_argument("sampling_distribution: dp expects d=2");
      probs[id(0, 0)] = ls.lambda[0];
      probs[id(1, 0)] = count_frac(gi.count_z[0], m) - ls.lambda[0];
      probs[id(0, 1)] = ls.lambda[1];
      probs[id(1, 1)] = count_frac(gi.count_z[1], m) - ls.lambda[1];
      break;
    }
  }
  return make_distribution(gi, std::move(probs));
}

SamplingDistribution uniform_distribution(const GroupIndex& gi) {
  if (gi.total == 0)
    throw std::invalid_argument("uniform_distribution: empty index");
  std::vector<double> probs(gi.cells.size());
  for (std::size_t c = 0; c < gi.cells.size(); ++c)
    probs[c] = count_frac(gi.count_yz[c], gi.total);
  return make_distribution(gi, std::move(probs));
}

BatchPlan draw_epoch(const SamplingDistribution& sd, std::size_t b,
                     std::size_t num_batches, Rng& rng,
                     BatchComposition composition) {
  if (b == 0) throw std::invalid_argument("draw_epoch: batch size must be >= 1");
  for (std::size_t c = 0; c < sd.set_probs.size(); ++c)
    if (sd.set_probs[c] > 0.0 && sd.members[c].empty())
      throw std::invalid_argument(
          "draw_epoch: set " + std::to_string(c) +
          " has positive probability but no members");

  // per-set cumulative member weights for non-uniform within-set draws
  std::vector<std::vector<double>> cum(sd.members.size());
  std::vector<bool> uniform_set(sd.members.size(), true);
  for (std::size_t c = 0; c < sd.members.size(); ++c) {
    const auto& w = sd.member_weights[c];
    if (w.empty()) continue;
    const double even = 1.0 / static_cast<double>(w.size());
    for (double wi : w)
      if (std::abs(wi - even) > 1e-15) {
        uniform_set[c] = false;
        break;
      }
    if (!uniform_set[c]) {
      cum[c].resize(w.size());
      std::partial_sum(w.begin(), w.end(), cum[c].begin());
    }
  }

  const auto draw_member = [&](std::size_t c) {
    const auto& rows = sd.members[c];
    if (uniform_set[c]) return rows[rng.next_below(rows.size())];
    const double u = rng.next_double() * cum[c].back();
    const auto it = std::upper_bound(cum[c].begin(), cum[c].end(), u);
    const std::size_t j =
        std::min(static_cast<std::size_t>(it - cum[c].begin()), rows.size() - 1);
    return rows[j];
  };

  BatchPlan plan;
  plan.batch_size = b;
  plan.batches_per_epoch = num_batches;
  plan.batches.resize(num_batches);

  if (composition == BatchComposition::iid) {
    for (auto& batch : plan.batches) {
      batch.reserve(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t c = rng.next_categorical(sd.set_probs);
        batch.push_back(draw_member(c));
      }
    }
    return plan;
  }

  // exact_counts: largest-remainder apportionment of b across sets
  std::vector<std::size_t> base(sd.set_probs.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sd.set_probs.size(); ++c) {
    const double exact = static_cast<double>(b) * sd.set_probs[c];
    base[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += base[c];
    if (sd.set_probs[c] > 0.0)
      rema.emplace_back(exact - std::floor(exact), c);
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b2) {
    if (a.first != b2.first) return a.first > b2.first;
    return a.second < b2.second;
  });
  for (std::size_t i = 0; assigned < b && i < rema.size(); ++i, ++assigned)
    ++base[rema[i].second];

  for (auto& batch : plan.batches) {
    batch.reserve(b);
    for (std::size_t c = 0; c < base.size(); ++c)
      for (std::size_t i = 0; i < base[c]; ++i) batch.push_back(draw_member(c));
  }
  return plan;
}

LambdaState update_lambda(const LambdaState& ls, const FairnessCriterion& criterion,
                          const GroupLossTable& t) {
  if (t.n_y != 2 || t.n_z != 2)
    throw std::invalid_argument("update_lambda: requires a binary loss table");
  LambdaState next = ls;
  const double a = ls.alpha;
  const double T = criterion.threshold;

  switch (criterion.kind) {
    case Fairness::eqopp: {
      const double d = t.at(1, 0) - t.at(1, 1);
      if (std::abs(d) > T) next.lambda[0] += a * sign_of(d);
      break;
    }
    case Fairness::eqodds: {
      const double d0 = t.at(0, 0) - t.at(0, 1);
      const double d1 = t.at(1, 0) - t.at(1, 1);
      if (std::abs(d0) > std::abs(d1)) {
        if (std::abs(d0) > T) next.lambda[0] += a * sign_of(d0);
      } else {
        if (std::abs(d1) > T) next.lambda[1] += a * sign_of(d1);
      }
      break;
    }
    case Fairness::dp: {
      // table from dp_update_losses; the y=0 dimension steps against the
      // gap's sign, the y=1 dimension with it
      const double d0 = t.at(0, 0) - t.at(0, 1);
      const double d1 = t.at(1, 0) - t.at(1, 1);
      if (std::abs(d0) > std::abs(d1)) {
        if (std::abs(d0) > T) next.lambda[0] -= a * sign_of(d0);
      } else {
        if (std::abs(d1) > T) next.lambda[1] += a * sign_of(d1);
      }
      break;
    }
  }
  next.clamp();
  return next;
}

LambdaState update_lambda(const LambdaState& ls,
                          const std::vector<DimensionDisparity>& objectives,
                          double threshold) {
  if (objectives.empty())
    throw std::invalid_argument("update_lambda: empty objective list");
  const auto it = std::max_element(
      objectives.begin(), objectives.end(),
      [](const DimensionDisparity& a, const DimensionDisparity& b) {
        return std::abs(a.delta) < std::abs(b.delta);
      });
  LambdaState next = ls;
  if (it->dim >= next.dim())
    throw std::invalid_argument("update_lambda: objective dimension out of range");
  if (std::abs(it->delta) > threshold)
    next.lambda[it->dim] += next.alpha * sign_of(it->delta);
  next.clamp();
  return next;
}

std::vector<DimensionDisparity> multigroup_objectives(
    const GroupLossTable& t, const FairnessCriterion& criterion) {
  if (t.n_z < 2)
    throw std::invalid_argument("multigroup_objectives: requires n_z >= 2");

  const auto class_objectives = [&](int y, std::size_t dim_base) {
    std::vector<DimensionDisparity> out;
    out.reserve(t.n_z - 1);
    for (int j = 0; j + 1 < t.n_z; ++j)
      out.push_back({dim_base + j, t.at(y, j) - t.at(y, j + 1)});
    return out;
  };

  // eqopp adjusts the y=1 class only, so its lambda has n_z - 1 dimensions;
  // the multi-class criteria carry one block of n_z - 1 dimensions per class
  if (criterion.kind == Fairness::eqopp) {
    if (t.n_y < 2)
      throw std::invalid_argument("multigroup_objectives: eqopp needs a y=1 class");
    return class_objectives(1, 0);
  }

  // eqodds / dp with general alphabets: adjust the class currently showing
  // the largest within-class gap
  int best_y = 0;
  double best_gap = -1.0;
  for (int y = 0; y < t.n_y; ++y) {
    double gap = 0.0;
    for (int j = 0; j + 1 < t.n_z; ++j)
      gap = std::max(gap, std::abs(t.at(y, j) - t.at(y, j + 1)));
    if (gap > best_gap) {
      best_gap = gap;
      best_y = y;
    }
  }
  return class_objectives(best_y,
                          static_cast<std::size_t>(best_y) * (t.n_z - 1));
}

SamplingDistribution loss_weighted_within_group(
    const SamplingDistribution& sd, std::span<const double> example_losses,
    double temperature) {
  if (example_losses.size() != sd.total)
    throw std::invalid_argument("loss_weighted_within_group: loss vector length");
  for (double l : example_losses)
    if (!(l >= 0.0) || !std::isfinite(l))
      throw std::invalid_argument(
          "loss_weighted_within_group: losses must be finite and >= 0");
  if (temperature < 0.0)
    throw std::invalid_argument("loss_weighted_within_group: temperature >= 0");

  SamplingDistribution out = sd;
  for (std::size_t c = 0; c < out.members.size(); ++c) {
    const auto& rows = out.members[c];
    const std::size_t n = rows.size();
    if (n == 0) continue;

    // fractional ranking by descending loss (rank 1 = highest, ties share
    // their average rank so equal losses keep equal weights)
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return example_losses[rows[a]] > example_losses[rows[b]];
    });
    if (example_losses[rows[order.front()]] == example_losses[rows[order.back()]])
      continue;  // a fully tied set keeps its weights bit-exactly
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && example_losses[rows[order[j + 1]]] ==
                              example_losses[rows[order[i]]])
        ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t q = i; q <= j; ++q) rank[order[q]] = avg;
      i = j + 1;
    }

    double total = 0.0;
    std::vector<double>& w = out.member_weights[c];
    for (std::size_t q = 0; q < n; ++q) {
      w[q] = std::pow(rank[q], -temperature);
      total += w[q];
    }
    for (double& wq : w) wq /= total;
  }
  return out;
}

std::vector<double> signed_gd_1d(const InnerEval& f_eval, double lambda0,
                                 double alpha, std::size_t steps, double upper) {
  if (alpha <= 0.0) throw std::invalid_argument("signed_gd_1d: alpha must be > 0");
  if (lambda0 < 0.0 || lambda0 > upper)
    throw std::invalid_argument("signed_gd_1d: lambda0 outside [0, upper]");
  std::vector<double> traj;
  traj.reserve(steps + 1);
  traj.push_back(lambda0);
  double l = lambda0;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto [f1, g1] = f_eval(l);
    l -= alpha * sign_of(g1 - f1);
    l = std::min(upper, std::max(0.0, l));
    traj.push_back(l);
  }
  return traj;
}

}  // namespace fairbatch
