#include "fairbatch/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fairbatch/rng.hpp"

namespace fairbatch {

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (sensitive.size() != n)
    throw std::invalid_argument("Dataset: label/sensitive length mismatch");
  if (k == 0 ? !features.empty() : features.size() != n * k)
    throw std::invalid_argument("Dataset: feature matrix size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= n_y)
      throw std::invalid_argument("Dataset: label out of range at row " +
                                  std::to_string(i));
    if (sensitive[i] < 0 || sensitive[i] >= n_z)
      throw std::invalid_argument("Dataset: sensitive value out of range at row " +
                                  std::to_string(i));
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.k = k;
  out.n_y = n_y;
  out.n_z = n_z;
  out.features.reserve(rows.size() * k);
  out.labels.reserve(rows.size());
  out.sensitive.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto x = row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(labels[r]);
    out.sensitive.push_back(sensitive[r]);
  }
  return out;
}

namespace {

// Class-conditional Gaussians of the synthetic benchmark.
struct Gauss2 {
  double mx, my;            // mean
  double a, b, c;           // covariance [[a, b], [b, c]]
  double l11, l21, l22;     // Cholesky factor, lower triangular
  double det;

  constexpr Gauss2(double mx_, double my_, double a_, double b_, double c_)
      : mx(mx_), my(my_), a(a_), b(b_), c(c_),
        l11(0), l21(0), l22(0), det(a_ * c_ - b_ * b_) {}

  void finalize() {
    l11 = std::sqrt(a);
    l21 = b / l11;
    l22 = std::sqrt(c - l21 * l21);
  }

  // log N(v; mean, cov) up to the shared -log(2*pi) constant
  double log_density(double x, double y) const {
    const double dx = x - mx, dy = y - my;
    const double quad = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
    return -0.5 * std::log(det) - 0.5 * quad;
  }
};

double sigmoid_stable(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

Dataset gen_synthetic(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("gen_synthetic: n must be >= 1");

  Gauss2 g0(-2.0, -2.0, 10.0, 1.0, 3.0);
  Gauss2 g1(2.0, 2.0, 5.0, 1.0, 5.0);
  g0.finalize();
  g1.finalize();

  Rng ry(seed, rng_stream::labels);
  Rng rx(seed, rng_stream::features);
  Rng rz(seed, rng_stream::sensitive);

  // rotation and sharpness of the sensitive-attribute assignment; calibrated
  // so a plain logistic baseline lands at the intended disparity levels
  constexpr double kZRotation = -0.305 * Rng::pi();
  constexpr double kZSharpness = 8.0;
  const double cs = std::cos(kZRotation);
  const double sn = std::sin(kZRotation);

  Dataset d;
  d.k = 2;
  d.n_y = 2;
  d.n_z = 2;
  d.features.reserve(2 * n);
  d.labels.reserve(n);
  d.sensitive.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const int y = ry.next_bernoulli(0.5) ? 1 : 0;
    const Gauss2& g = y == 1 ? g1 : g0;
    const double e1 = rx.next_normal();
    const double e2 = rx.next_normal();
    const double x1 = g.mx + g.l11 * e1;
    const double x2 = g.my + g.l21 * e1 + g.l22 * e2;

    // the "unfair scenario": z depends on the rotated point through the
    // sharpened density ratio of the two class Gaussians
    const double r1 = x1 * cs - x2 * sn;
    const double r2 = x1 * sn + x2 * cs;
    const double p_z1 = sigmoid_stable(
        kZSharpness * (g1.log_density(r1, r2) - g0.log_density(r1, r2)));

    d.features.push_back(x1);
    d.features.push_back(x2);
    d.labels.push_back(y);
    d.sensitive.push_back(rz.next_bernoulli(p_z1) ? 1 : 0);
  }
  return d;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no,
                    const std::string& col) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw std::runtime_error("csv: non-numeric value '" + s + "' in column '" +
                             col + "' at line " + std::to_string(line_no));
  return v;
}

int parse_class(const std::string& s, std::size_t line_no,
                const std::string& col) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || v < 0 ||
      v > 1'000'000)
    throw std::runtime_error("csv: column '" + col +
                             "' must hold small non-negative integers, got '" +
                             s + "' at line " + std::to_string(line_no));
  return static_cast<int>(v);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& sensitive_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::runtime_error("csv: '" + path + "' is empty or has no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_line(line);
  std::ptrdiff_t label_idx = -1, sensitive_idx = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_idx = static_cast<std::ptrdiff_t>(c);
    if (header[c] == sensitive_column)
      sensitive_idx = static_cast<std::ptrdiff_t>(c);
  }
  if (label_idx < 0)
    throw std::runtime_error("csv: missing label column '" + label_column +
                             "' in '" + path + "'");
  if (sensitive_idx < 0)
    throw std::runtime_error("csv: missing sensitive column '" +
                             sensitive_column + "' in '" + path + "'");

  Dataset d;
  d.k = header.size() - 2;
  int max_y = -1, max_z = -1;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error(
          "csv: expected " + std::to_string(header.size()) + " fields, got " +
          std::to_string(fields.size()) + " at line " + std::to_string(line_no));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto ci = static_cast<std::ptrdiff_t>(c);
      if (ci == label_idx) {
        const int y = parse_class(fields[c], line_no, header[c]);
        max_y = std::max(max_y, y);
        d.labels.push_back(y);
      } else if (ci == sensitive_idx) {
        const int z = parse_class(fields[c], line_no, header[c]);
        max_z = std::max(max_z, z);
        d.sensitive.push_back(z);
      } else {
        d.features.push_back(parse_double(fields[c], line_no, header[c]));
      }
    }
  }

  d.n_y = max_y + 1;
  d.n_z = max_z + 1;
  d.validate();
  return d;
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  out.precision(17);
  for (std::size_t c = 0; c < d.k; ++c) out << 'x' << (c + 1) << ',';
  out << "z,y\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.row(i);
    for (double v : x) out << v << ',';
    out << d.sensitive[i] << ',' << d.labels[i] << '\n';
  }
  if (!out) throw std::runtime_error("csv: write to '" + path + "' failed");
}

GroupIndex build_group_index(const Dataset& d) {
  GroupIndex gi;
  gi.n_y = d.n_y;
  gi.n_z = d.n_z;
  const std::size_t ncells = static_cast<std::size_t>(d.n_y) * d.n_z;
  gi.cells.resize(ncells);
  gi.count_yz.assign(ncells, 0);
  gi.count_y.assign(d.n_y, 0);
  gi.count_z.assign(d.n_z, 0);
  gi.total = d.size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = gi.cell_id(d.labels[i], d.sensitive[i]);
    gi.cells[c].push_back(i);
    ++gi.count_yz[c];
    ++gi.count_y[d.labels[i]];
    ++gi.count_z[d.sensitive[i]];
  }
  return gi;
}

std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s) {
  if (!(s.train_fraction > 0.0 && s.train_fraction <= 1.0))
    throw std::invalid_argument("split: train_fraction must be in (0, 1]");
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  Rng rng(s.seed, rng_stream::split);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }

  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * s.train_fraction));
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_rows(order.begin() + n_train, order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {d.subset(train_rows), d.subset(test_rows)};
}

Dataset cutting(const Dataset& d, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_group(d.n_z);
  for (std::size_t i = 0; i < d.size(); ++i)
    by_group[d.sensitive[i]].push_back(i);

  std::size_t smallest = d.size();
  for (int z = 0; z < d.n_z; ++z) {
    if (by_group[z].empty())
      throw std::invalid_argument("cutting: sensitive group " +
                                  std::to_string(z) + " is empty");
    smallest = std::min(smallest, by_group[z].size());
  }

  Rng rng(seed, rng_stream::cutting);
  std::vector<std::size_t> keep;
  keep.reserve(smallest * d.n_z);
  for (int z = 0; z < d.n_z; ++z) {
    auto& rows = by_group[z];
    // partial Fisher-Yates: the first `smallest` entries are a uniform
    // without-replacement sample
    for (std::size_t i = 0; i < smallest; ++i) {
      const std::size_t j = i + rng.next_below(rows.size() - i);
      std::swap(rows[i], rows[j]);
    }
    keep.insert(keep.end(), rows.begin(), rows.begin() + smallest);
  }
  std::sort(keep.begin(), keep.end());
  return d.subset(keep);
}

}  // namespace fairbatch
