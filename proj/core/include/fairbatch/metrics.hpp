#pragma once

#include <vector>

#include "fairbatch/dataset.hpp"
#include "fairbatch/model.hpp"

namespace fairbatch {

/// Mean criterion loss per (y,z) cell together with count-weighted marginals
/// and the demographic-parity rescalings: dp_normalized holds
/// L'_{y,z} = (m_{y,z} / m_{*,z}) * L_{y,z}, and for binary alphabets
/// dp_constant holds c = m_{0,0}/m_{*,0} - m_{0,1}/m_{*,1} (NaN otherwise).
/// Empty cells contribute a 0 mean and are listed in empty_cells.
struct GroupLossTable {
  int n_y = 0;
  int n_z = 0;
  std::vector<double> cell;    // indexed y * n_z + z
  std::vector<double> row;     // L_{y,*}
  std::vector<double> col;     // L_{*,z}
  double overall = 0.0;
  std::vector<double> dp_normalized;
  double dp_constant = 0.0;
  std::vector<std::size_t> count_yz, count_y, count_z;
  std::size_t total = 0;
  std::vector<std::size_t> empty_cells;

  double at(int y, int z) const {
    return cell[static_cast<std::size_t>(y) * n_z + z];
  }
};

/// Test-set summary emitted once per epoch.
struct DisparityReport {
  double accuracy = 0.0;
  double eo = 0.0;
  double ed = 0.0;
  double dp = 0.0;
};

/// Per-cell mean losses over the whole dataset. Empty cells get a 0
/// sentinel (recorded in empty_cells) instead of failing, so transiently
/// empty groups cannot crash a training run.
GroupLossTable group_losses(const ModelParams& p, const Dataset& d,
                            const GroupIndex& gi, const LossSpec& spec);

/// Loss table driving the demographic-parity lambda update: per-example BCE
/// against the all-ones target, summed per (y,z) cell and divided by the
/// sensitive-group size m_{*,z} rather than the cell size.
GroupLossTable dp_update_losses(const ModelParams& p, const Dataset& d,
                                const GroupIndex& gi);

double accuracy(const ModelParams& p, const Dataset& d);

/// max_z |Pr(yhat=1 | z, y=1) - Pr(yhat=1 | y=1)| with hard predictions.
/// Requires at least one y=1 row in every sensitive group.
double eo_disparity(const ModelParams& p, const Dataset& d, const GroupIndex& gi);

/// max over z, y and predicted class of |Pr(yhat | z, y) - Pr(yhat | y)|.
/// Requires every (y,z) cell nonempty.
double ed_disparity(const ModelParams& p, const Dataset& d, const GroupIndex& gi);

/// max_z |Pr(yhat=1 | z) - Pr(yhat=1)|. Requires every group nonempty.
double dp_disparity(const ModelParams& p, const Dataset& d, const GroupIndex& gi);

/// The sufficient-condition objective for demographic parity on binary
/// alphabets: max{ |L'_{1,0} - L'_{1,1}| , |L'_{0,0} - L'_{0,1}|_c } with
/// |x|_c = max{x - c, c - x}. Throws unless n_y == n_z == 2.
double dp_sufficient_objective(const GroupLossTable& t);

DisparityReport evaluate(const ModelParams& p, const Dataset& d,
                         const GroupIndex& gi);

}  // namespace fairbatch
