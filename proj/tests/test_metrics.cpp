#include <doctest.h>

#include <cmath>

#include "fairbatch/metrics.hpp"
#include "fairbatch/rng.hpp"

using namespace fairbatch;

namespace {

// one feature; the reference model predicts 1 exactly when x > 0
ModelParams sign_model() {
  ModelParams p;
  p.k = 1;
  p.n_y = 2;
  p.weights = {1.0};
  p.bias = {0.0};
  return p;
}

struct RowSpec {
  int y, z;
  bool predicted_positive;
};

Dataset from_rows(const std::vector<RowSpec>& rows, int n_y = 2, int n_z = 2) {
  Dataset d;
  d.k = 1;
  d.n_y = n_y;
  d.n_z = n_z;
  for (const RowSpec& r : rows) {
    d.features.push_back(r.predicted_positive ? 1.0 : -1.0);
    d.labels.push_back(r.y);
    d.sensitive.push_back(r.z);
  }
  return d;
}

// rows expands to `count` copies, `positives` of them predicted positive
void fill(std::vector<RowSpec>& rows, int y, int z, int count, int positives) {
  for (int i = 0; i < count; ++i) rows.push_back({y, z, i < positives});
}

constexpr LossSpec kBce{LossKind::binary_cross_entropy};
constexpr LossSpec kZeroOne{LossKind::zero_one};

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("group losses of a perfect classifier are zero") {
  std::vector<RowSpec> rows;
  fill(rows, 1, 0, 5, 5);
  fill(rows, 1, 1, 5, 5);
  fill(rows, 0, 0, 5, 0);
  fill(rows, 0, 1, 5, 0);
  const Dataset d = from_rows(rows);
  const GroupLossTable t =
      group_losses(sign_model(), d, build_group_index(d), kZeroOne);
  for (double v : t.cell) CHECK(v == 0.0);
  CHECK(t.overall == 0.0);
}

TEST_CASE("group losses match hand-computed cell means") {
  // 4 rows, one per cell; y=1 rows predicted negative, y=0 rows positive
  const Dataset d = from_rows({{0, 0, true}, {0, 1, false}, {1, 0, false}, {1, 1, true}});
  const GroupIndex gi = build_group_index(d);
  const GroupLossTable t = group_losses(sign_model(), d, gi, kZeroOne);
  CHECK(t.at(0, 0) == 1.0);
  CHECK(t.at(0, 1) == 0.0);
  CHECK(t.at(1, 0) == 1.0);
  CHECK(t.at(1, 1) == 0.0);
  CHECK(t.row[1] == doctest::Approx(0.5));
  CHECK(t.overall == doctest::Approx(0.5));
}

TEST_CASE("marginals are count-weighted cell averages") {
  const Dataset d = gen_synthetic(600, 9);
  const GroupIndex gi = build_group_index(d);
  ModelParams p = ModelParams::zeros(2);
  p.weights = {0.4, 0.9};
  p.bias = {0.05};
  const GroupLossTable t = group_losses(p, d, gi, kBce);
  for (int y = 0; y < 2; ++y) {
    const double lhs = t.row[y] * double(gi.count_y[y]);
    const double rhs =
        t.at(y, 0) * double(gi.m(y, 0)) + t.at(y, 1) * double(gi.m(y, 1));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("empty cells yield the zero sentinel and are reported") {
  const Dataset d = from_rows({{0, 0, false}, {1, 1, true}});
  const GroupIndex gi = build_group_index(d);
  const GroupLossTable t = group_losses(sign_model(), d, gi, kZeroOne);
  CHECK(t.at(0, 1) == 0.0);
  CHECK(t.at(1, 0) == 0.0);
  CHECK(t.empty_cells.size() == 2);
}

TEST_CASE("eo disparity closed cases") {
  std::vector<RowSpec> rows;
  SUBCASE("equal TPRs give zero") {
    fill(rows, 1, 0, 10, 7);
    fill(rows, 1, 1, 10, 7);
    const Dataset d = from_rows(rows);
    CHECK(eo_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.0));
  }
  SUBCASE("tpr 0.8 vs 0.6 over equal groups gives 0.1") {
    fill(rows, 1, 0, 10, 8);
    fill(rows, 1, 1, 10, 6);
    fill(rows, 0, 0, 3, 0);
    fill(rows, 0, 1, 3, 0);
    const Dataset d = from_rows(rows);
    CHECK(eo_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("three groups") {
    fill(rows, 1, 0, 10, 9);
    fill(rows, 1, 1, 10, 5);
    fill(rows, 1, 2, 10, 7);
    const Dataset d = from_rows(rows, 2, 3);
    CHECK(eo_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("eo requires y=1 rows in every group") {
  std::vector<RowSpec> rows;
  fill(rows, 1, 0, 5, 3);
  fill(rows, 0, 1, 5, 1);
  const Dataset d = from_rows(rows);
  CHECK_THROWS_AS(eo_disparity(sign_model(), d, build_group_index(d)),
                  std::invalid_argument);
}

TEST_CASE("ed disparity cases") {
  std::vector<RowSpec> rows;
  SUBCASE("identical group behavior gives zero") {
    fill(rows, 1, 0, 10, 8);
    fill(rows, 1, 1, 10, 8);
    fill(rows, 0, 0, 10, 2);
    fill(rows, 0, 1, 10, 2);
    const Dataset d = from_rows(rows);
    CHECK(ed_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.0));
  }
  SUBCASE("a pure tpr gap of 0.1 appears unchanged") {
    fill(rows, 1, 0, 10, 8);
    fill(rows, 1, 1, 10, 6);
    fill(rows, 0, 0, 10, 2);
    fill(rows, 0, 1, 10, 2);
    const Dataset d = from_rows(rows);
    CHECK(ed_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("gaps in both label strata take the max deviation") {
    fill(rows, 0, 0, 10, 3);  // fpr .3 vs .1, base .2 -> dev .1
    fill(rows, 0, 1, 10, 1);
    fill(rows, 1, 0, 10, 8);  // tpr .8 vs .4, base .6 -> dev .2
    fill(rows, 1, 1, 10, 4);
    const Dataset d = from_rows(rows);
    CHECK(ed_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("ed requires every cell nonempty") {
  std::vector<RowSpec> rows;
  fill(rows, 0, 0, 5, 1);
  fill(rows, 1, 0, 5, 4);
  fill(rows, 1, 1, 5, 4);
  const Dataset d = from_rows(rows);
  CHECK_THROWS_AS(ed_disparity(sign_model(), d, build_group_index(d)),
                  std::invalid_argument);
}

TEST_CASE("dp disparity cases") {
  std::vector<RowSpec> rows;
  SUBCASE("a constant classifier is perfectly par") {
    fill(rows, 1, 0, 6, 6);
    fill(rows, 0, 1, 6, 6);
    const Dataset d = from_rows(rows);
    CHECK(dp_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.0));
  }
  SUBCASE("positive rates 0.5 and 0.9 over equal groups give 0.2") {
    fill(rows, 1, 0, 10, 5);
    fill(rows, 1, 1, 10, 9);
    const Dataset d = from_rows(rows);
    CHECK(dp_disparity(sign_model(), d, build_group_index(d)) ==
          doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("a single group has zero deviation") {
    fill(rows, 1, 0, 10, 4);
    fill(rows, 0, 0, 5, 1);
    const Dataset d = from_rows(rows, 2, 1);
    CHECK(dp_disparity(sign_model(), d, build_group_index(d)) == 0.0);
  }
}

TEST_CASE("dp sufficient objective") {
  SUBCASE("balanced counts reduce to plain differences") {
    std::vector<RowSpec> rows;
    fill(rows, 0, 0, 10, 2);  // zero-one loss .2
    fill(rows, 0, 1, 10, 5);  // .5
    fill(rows, 1, 0, 10, 6);  // miss rate .4
    fill(rows, 1, 1, 10, 9);  // .1
    const Dataset d = from_rows(rows);
    const GroupLossTable t =
        group_losses(sign_model(), d, build_group_index(d), kZeroOne);
    CHECK(t.dp_constant == doctest::Approx(0.0));
    // L' = L/2; objective = max(|.4-.1|, |.2-.5|)/2 = .15
    CHECK(dp_sufficient_objective(t) == doctest::Approx(0.15).epsilon(1e-12));
  }
  SUBCASE("unbalanced counts shift the y=0 term by c") {
    GroupLossTable t;
    t.n_y = 2;
    t.n_z = 2;
    t.dp_constant = 0.2;
    t.dp_normalized = {0.5, 0.1, 0.3, 0.2};  // L'00, L'01, L'10, L'11
    // term1 = |.3-.2| = .1; term0 = |.4|_c with c=.2 -> max(.2, -.2) = .2
    CHECK(dp_sufficient_objective(t) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("differences (0, c) satisfy the sufficient condition exactly") {
    GroupLossTable t;
    t.n_y = 2;
    t.n_z = 2;
    t.dp_constant = 0.15;
    t.dp_normalized = {0.40, 0.25, 0.3, 0.3};  // y=0 diff = c, y=1 diff = 0
    CHECK(dp_sufficient_objective(t) == doctest::Approx(0.0));
  }
  SUBCASE("non-binary alphabets are rejected") {
    GroupLossTable t;
    t.n_y = 3;
    t.n_z = 2;
    CHECK_THROWS_AS(dp_sufficient_objective(t), std::invalid_argument);
  }
}

TEST_CASE("zero sufficient objective implies zero dp disparity") {
  Rng rng(91);
  for (int trial = 0; trial < 25; ++trial) {
    // balanced cells with identical per-z prediction behavior: the
    // objective vanishes and so must the disparity
    const int cell = 4 + int(rng.next_below(8));
    const int pos0 = int(rng.next_below(cell + 1));
    const int pos1 = int(rng.next_below(cell + 1));
    std::vector<RowSpec> rows;
    fill(rows, 0, 0, cell, pos0);
    fill(rows, 0, 1, cell, pos0);
    fill(rows, 1, 0, cell, pos1);
    fill(rows, 1, 1, cell, pos1);
    const Dataset d = from_rows(rows);
    const GroupIndex gi = build_group_index(d);
    const GroupLossTable t = group_losses(sign_model(), d, gi, kZeroOne);
    CHECK(dp_sufficient_objective(t) == doctest::Approx(0.0));
    CHECK(dp_disparity(sign_model(), d, gi) == doctest::Approx(0.0));
  }
}

namespace {

// brute-force conditional tabulation, the independent oracle for all three
// disparity measures
struct BruteForce {
  double eo, ed, dp;
};

BruteForce brute_force(const ModelParams& p, const Dataset& d) {
  const int n_y = d.n_y, n_z = d.n_z;
  std::vector<int> pred(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) pred[i] = predict_class(p, d.row(i));

  const auto prob = [&](auto&& keep, auto&& event) {
    std::size_t among = 0, hit = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (keep(i)) {
        ++among;
        if (event(i)) ++hit;
      }
    return double(hit) / double(among);
  };

  double eo = 0;
  for (int z = 0; z < n_z; ++z) {
    const double lhs = prob([&](std::size_t i) { return d.labels[i] == 1 && d.sensitive[i] == z; },
                            [&](std::size_t i) { return pred[i] == 1; });
    const double rhs = prob([&](std::size_t i) { return d.labels[i] == 1; },
                            [&](std::size_t i) { return pred[i] == 1; });
    eo = std::max(eo, std::abs(lhs - rhs));
  }

  double ed = 0;
  for (int z = 0; z < n_z; ++z)
    for (int y = 0; y < n_y; ++y)
      for (int yh = 0; yh < std::max(n_y, 2); ++yh) {
        const double lhs =
            prob([&](std::size_t i) { return d.labels[i] == y && d.sensitive[i] == z; },
                 [&](std::size_t i) { return pred[i] == yh; });
        const double rhs = prob([&](std::size_t i) { return d.labels[i] == y; },
                                [&](std::size_t i) { return pred[i] == yh; });
        ed = std::max(ed, std::abs(lhs - rhs));
      }

  double dp = 0;
  for (int z = 0; z < n_z; ++z) {
    const double lhs = prob([&](std::size_t i) { return d.sensitive[i] == z; },
                            [&](std::size_t i) { return pred[i] == 1; });
    const double rhs = prob([](std::size_t) { return true; },
                            [&](std::size_t i) { return pred[i] == 1; });
    dp = std::max(dp, std::abs(lhs - rhs));
  }
  return {eo, ed, dp};
}

}  // namespace

TEST_CASE("disparities match the brute-force oracle on random data") {
  Rng rng(2024);
  int done = 0;
  while (done < 200) {
    const int n_z = 2 + int(rng.next_below(2));
    const std::size_t n = 8 + rng.next_below(43);  // n <= 50
    Dataset d;
    d.k = 2;
    d.n_y = 2;
    d.n_z = n_z;
    for (std::size_t i = 0; i < n; ++i) {
      d.features.push_back(rng.next_normal());
      d.features.push_back(rng.next_normal());
      d.labels.push_back(int(rng.next_below(2)));
      d.sensitive.push_back(int(rng.next_below(n_z)));
    }
    const GroupIndex gi = build_group_index(d);
    bool full = true;
    for (std::size_t c = 0; c < gi.cells.size(); ++c)
      if (gi.cells[c].empty()) full = false;
    if (!full) continue;  // regenerate until the preconditions hold
    ++done;

    ModelParams p = ModelParams::zeros(2);
    p.weights = {rng.next_normal(), rng.next_normal()};
    p.bias = {0.3 * rng.next_normal()};

    const BruteForce oracle = brute_force(p, d);
    CHECK(std::abs(eo_disparity(p, d, gi) - oracle.eo) <= 1e-12);
    CHECK(std::abs(ed_disparity(p, d, gi) - oracle.ed) <= 1e-12);
    CHECK(std::abs(dp_disparity(p, d, gi) - oracle.dp) <= 1e-12);

    // ED ranges over a superset of EO's events
    CHECK(ed_disparity(p, d, gi) >= eo_disparity(p, d, gi) - 1e-12);
  }
}

TEST_CASE("evaluate aggregates all four measures") {
  const Dataset d = gen_synthetic(900, 13);
  const GroupIndex gi = build_group_index(d);
  ModelParams p = ModelParams::zeros(2);
  p.weights = {0.4, 0.9};
  const DisparityReport r = evaluate(p, d, gi);
  for (double v : {r.accuracy, r.eo, r.ed, r.dp}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_SUITE_END();
