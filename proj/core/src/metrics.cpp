#include "fairbatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fairbatch {

namespace {

GroupLossTable finalize_table(const GroupIndex& gi, std::vector<double> cell,
                              const std::vector<std::size_t>& empty_cells) {
  GroupLossTable t;
  t.n_y = gi.n_y;
  t.n_z = gi.n_z;
  t.cell = std::move(cell);
  t.count_yz = gi.count_yz;
  t.count_y = gi.count_y;
  t.count_z = gi.count_z;
  t.total = gi.total;
  t.empty_cells = empty_cells;

  t.row.assign(gi.n_y, 0.0);
  t.col.assign(gi.n_z, 0.0);
  double overall = 0.0;
  for (int y = 0; y < gi.n_y; ++y) {
    for (int z = 0; z < gi.n_z; ++z) {
      const double w = static_cast<double>(gi.m(y, z));
      const double v = t.at(y, z);
      t.row[y] += w * v;
      t.col[z] += w * v;
      overall += w * v;
    }
  }
  for (int y = 0; y < gi.n_y; ++y)
    if (gi.count_y[y] > 0) t.row[y] /= static_cast<double>(gi.count_y[y]);
  for (int z = 0; z < gi.n_z; ++z)
    if (gi.count_z[z] > 0) t.col[z] /= static_cast<double>(gi.count_z[z]);
  t.overall = gi.total > 0 ? overall / static_cast<double>(gi.total) : 0.0;

  t.dp_normalized.assign(t.cell.size(), 0.0);
  for (int y = 0; y < gi.n_y; ++y)
    for (int z = 0; z < gi.n_z; ++z)
      if (gi.count_z[z] > 0)
        t.dp_normalized[gi.cell_id(y, z)] =
            static_cast<double>(gi.m(y, z)) / static_cast<double>(gi.count_z[z]) *
            t.at(y, z);

  if (gi.n_y == 2 && gi.n_z == 2 && gi.count_z[0] > 0 && gi.count_z[1] > 0) {
    t.dp_constant =
        static_cast<double>(gi.m(0, 0)) / static_cast<double>(gi.count_z[0]) -
        static_cast<double>(gi.m(0, 1)) / static_cast<double>(gi.count_z[1]);
  } else {
    t.dp_constant = std::numeric_limits<double>::quiet_NaN();
  }
  return t;
}

}  // namespace

GroupLossTable group_losses(const ModelParams& p, const Dataset& d,
                            const GroupIndex& gi, const LossSpec& spec) {
  std::vector<double> cell(gi.cells.size(), 0.0);
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < gi.cells.size(); ++c) {
    if (gi.cells[c].empty()) {
      empty.push_back(c);
      continue;
    }
    double sum = 0.0;
    for (std::size_t i : gi.cells[c])
      sum += example_loss(p, d.row(i), d.labels[i], spec);
    cell[c] = sum / static_cast<double>(gi.cells[c].size());
  }
  return finalize_table(gi, std::move(cell), empty);
}

GroupLossTable dp_update_losses(const ModelParams& p, const Dataset& d,
                                const GroupIndex& gi) {
  // criterion(output, 1): BCE of every example against target class 1,
  // normalized by the z-group size
  std::vector<double> cell(gi.cells.size(), 0.0);
  std::vector<std::size_t> empty;
  for (int y = 0; y < gi.n_y; ++y) {
    for (int z = 0; z < gi.n_z; ++z) {
      const auto& rows = gi.cell(y, z);
      if (rows.empty()) {
        empty.push_back(gi.cell_id(y, z));
        continue;
      }
      double sum = 0.0;
      for (std::size_t i : rows)
        sum += example_loss(p, d.row(i), 1,
                            LossSpec{LossKind::binary_cross_entropy});
      cell[gi.cell_id(y, z)] = sum / static_cast<double>(gi.count_z[z]);
    }
  }
  return finalize_table(gi, std::move(cell), empty);
}

double accuracy(const ModelParams& p, const Dataset& d) {
  if (d.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (predict_class(p, d.row(i)) == d.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

double eo_disparity(const ModelParams& p, const Dataset& d, const GroupIndex& gi) {
  if (gi.n_y < 2 || gi.count_y[1] == 0)
    throw std::invalid_argument("eo_disparity: no y=1 rows");
  std::size_t pos_total = 0;
  std::vector<std::size_t> pos_z(gi.n_z, 0);
  for (int z = 0; z < gi.n_z; ++z) {
    if (gi.m(1, z) == 0)
      throw std::invalid_argument("eo_disparity: group z=" + std::to_string(z) +
                                  " has no y=1 rows");
    for (std::size_t i : gi.cell(1, z))
      if (predict_class(p, d.row(i)) == 1) ++pos_z[z];
    pos_total += pos_z[z];
  }
  const double overall =
      static_cast<double>(pos_total) / static_cast<double>(gi.count_y[1]);
  double disparity = 0.0;
  for (int z = 0; z < gi.n_z; ++z) {
    const double rate =
        static_cast<double>(pos_z[z]) / static_cast<double>(gi.m(1, z));
    disparity = std::max(disparity, std::abs(rate - overall));
  }
  return disparity;
}

double ed_disparity(const ModelParams& p, const Dataset& d, const GroupIndex& gi) {
  // counts of predicted class yhat within (y,z) and within y
  const int n_pred = std::max(gi.n_y, 2);
  std::vector<std::size_t> cell_pred(gi.cells.size() * n_pred, 0);
  std::vector<std::size_t> row_pred(static_cast<std::size_t>(gi.n_y) * n_pred, 0);

  for (int y = 0; y < gi.n_y; ++y)
    for (int z = 0; z < gi.n_z; ++z) {
      if (gi.m(y, z) == 0)
        throw std::invalid_argument("ed_disparity: empty cell (y=" +
                                    std::to_string(y) + ", z=" +
                                    std::to_string(z) + ")");
      for (std::size_t i : gi.cell(y, z)) {
        const int yh = predict_class(p, d.row(i));
        ++cell_pred[gi.cell_id(y, z) * n_pred + yh];
        ++row_pred[static_cast<std::size_t>(y) * n_pred + yh];
      }
    }

  double disparity = 0.0;
  for (int y = 0; y < gi.n_y; ++y)
    for (int z = 0; z < gi.n_z; ++z)
      for (int yh = 0; yh < n_pred; ++yh) {
        const double cond =
            static_cast<double>(cell_pred[gi.cell_id(y, z) * n_pred + yh]) /
            static_cast<double>(gi.m(y, z));
        const double base =
            static_cast<double>(row_pred[static_cast<std::size_t>(y) * n_pred + yh]) /
            static_cast<double>(gi.count_y[y]);
        disparity = std::max(disparity, std::abs(cond - base));
      }
  return disparity;
}

double dp_disparity(const ModelParams& p, const Dataset& d, const GroupIndex& gi) {
  std::vector<std::size_t> pos_z(gi.n_z, 0);
  std::size_t pos_total = 0;
  for (int z = 0; z < gi.n_z; ++z)
    if (gi.count_z[z] == 0)
      throw std::invalid_argument("dp_disparity: sensitive group z=" +
                                  std::to_string(z) + " is empty");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (predict_class(p, d.row(i)) == 1) {
      ++pos_z[d.sensitive[i]];
      ++pos_total;
    }
  }
  const double overall =
      static_cast<double>(pos_total) / static_cast<double>(d.size());
  double disparity = 0.0;
  for (int z = 0; z < gi.n_z; ++z) {
    const double rate =
        static_cast<double>(pos_z[z]) / static_cast<double>(gi.count_z[z]);
    disparity = std::max(disparity, std::abs(rate - overall));
  }
  return disparity;
}

double dp_sufficient_objective(const GroupLossTable& t) {
  if (t.n_y != 2 || t.n_z != 2)
    throw std::invalid_argument(
        "dp_sufficient_objective: requires binary label and sensitive alphabets");
  const auto lp = [&](int y, int z) {
    return t.dp_normalized[static_cast<std::size_t>(y) * t.n_z + z];
  };
  const double c = t.dp_constant;
  const double term1 = std::abs(lp(1, 0) - lp(1, 1));
  const double x = lp(0, 0) - lp(0, 1);
  const double term0 = std::max(x - c, c - x);
  return std::max(term1, term0);
}

DisparityReport evaluate(const ModelParams& p, const Dataset& d,
                         const GroupIndex& gi) {
  DisparityReport r;
  r.accuracy = accuracy(p, d);
  r.eo = eo_disparity(p, d, gi);
  r.ed = ed_disparity(p, d, gi);
  r.dp = dp_disparity(p, d, gi);
  return r;
}

}  // namespace fairbatch
