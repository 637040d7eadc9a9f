#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fairbatch {

/// Tabular classification data: an n x k feature matrix plus a label column
/// over {0..n_y-1} and a sensitive-attribute column over {0..n_z-1}.
/// Instances are immutable after construction and safe to share across
/// threads.
struct Dataset {
  std::vector<double> features;  // row-major, size n * k
  std::vector<int> labels;       // size n
  std::vector<int> sensitive;    // size n
  std::size_t k = 0;
  int n_y = 2;
  int n_z = 2;

  std::size_t size() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * k, k};
  }

  /// Throws std::invalid_argument if column lengths disagree or any label /
  /// sensitive value falls outside its alphabet.
  void validate() const;

  /// New dataset holding the given rows (in the given order).
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Per-(y,z) partition of a dataset's row indices with the associated counts
/// m_{y,z}, m_{y,*} and m_{*,z}. Cell lists are sorted and disjoint; their
/// union covers every row.
struct GroupIndex {
  int n_y = 0;
  int n_z = 0;
  std::vector<std::vector<std::size_t>> cells;  // indexed y * n_z + z
  std::vector<std::size_t> count_yz;            // m_{y,z}, same indexing
  std::vector<std::size_t> count_y;             // m_{y,*}
  std::vector<std::size_t> count_z;             // m_{*,z}
  std::size_t total = 0;

  std::size_t cell_id(int y, int z) const {
    return static_cast<std::size_t>(y) * n_z + z;
  }
  const std::vector<std::size_t>& cell(int y, int z) const {
    return cells[cell_id(y, z)];
  }
  std::size_t m(int y, int z) const { return count_yz[cell_id(y, z)]; }
};

/// Fraction of rows assigned to the train side of a split, plus the seed that
/// fixes the row permutation.
struct SplitSpec {
  double train_fraction = 2.0 / 3.0;  // in (0, 1]
  std::uint64_t seed = 0;
};

/// Generates the biased two-Gaussian benchmark: y ~ Bernoulli(1/2),
/// x|y=0 ~ N([-2,-2], [[10,1],[1,3]]), x|y=1 ~ N([2,2], [[5,1],[1,5]]),
/// and z ~ Bernoulli(sigmoid(s * (log p1(x') - log p0(x')))) where x' is x
/// rotated by a fixed angle, p_y is the class-y Gaussian density and s a
/// fixed sharpness. Output is a deterministic function of (n, seed); labels,
/// features and sensitive draws come from separate substreams.
Dataset gen_synthetic(std::size_t n, std::uint64_t seed);

/// Loads a headered CSV. The named label and sensitive columns must hold
/// small non-negative integers; every other column becomes a feature, in
/// header order. Alphabet sizes are inferred as max value + 1.
/// Parse failures throw std::runtime_error with row/column position.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& sensitive_column);

/// Writes a dataset as CSV with columns x1..xk,z,y. Feature values are
/// printed with enough digits to round-trip exactly through load_csv.
void write_csv(const Dataset& d, const std::string& path);

GroupIndex build_group_index(const Dataset& d);

/// Random row-level partition: floor(n * train_fraction) rows on the train
/// side, the rest on the test side. Same spec, same partition.
std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s);

/// Subsamples every sensitive group down to the smallest group's size,
/// uniformly without replacement. Throws if some group is empty.
Dataset cutting(const Dataset& d, std::uint64_t seed);

}  // namespace fairbatch
