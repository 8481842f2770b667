#include "clamshell/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

namespace clamshell {
namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = standard_normal(rng);
  return m;
}

// Haar-distributed orthogonal matrix via QR with sign correction.
Eigen::MatrixXd random_rotation(Eigen::Index n, Rng& rng) {
  const Eigen::MatrixXd g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

Dataset generate_dataset(const DatasetParams& p) {
  if (p.n_points < 1) throw std::invalid_argument("n_points must be >= 1");
  if (p.n_informative < 1 || p.n_informative > p.n_features)
    throw std::invalid_argument("need 1 <= n_informative <= n_features");
  if (p.n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  if (!(p.class_sep > 0.0)) throw std::invalid_argument("class_sep must be > 0");
  if (p.n_informative < 63 &&
      (std::uint64_t{1} << p.n_informative) < static_cast<std::uint64_t>(p.n_classes))
    throw std::invalid_argument("2^n_informative must be >= n_classes");

  Rng rng = make_stream(p.seed, stable_hash("dataset"));
  const auto n = static_cast<Eigen::Index>(p.n_points);
  const auto d = static_cast<Eigen::Index>(p.n_features);
  const auto di = static_cast<Eigen::Index>(p.n_informative);
  const int C = p.n_classes;

  // Distinct vertices of {-1,+1}^n_informative.
  std::vector<std::vector<double>> vertices;
  while (static_cast<int>(vertices.size()) < C) {
    std::vector<double> v(p.n_informative);
    for (auto& x : v) x = (rng() & 1) ? 1.0 : -1.0;
    if (std::find(vertices.begin(), vertices.end(), v) == vertices.end()) vertices.push_back(v);
  }

  Dataset ds;
  ds.n_classes = C;
  ds.params = p;
  ds.features = Eigen::MatrixXd::Zero(n, d);
  ds.labels.resize(p.n_points);

  Eigen::Index row = 0;
  for (int c = 0; c < C; ++c) {
    const auto count = static_cast<Eigen::Index>(p.n_points / C + (static_cast<std::size_t>(c) < p.n_points % C ? 1 : 0));
    Eigen::MatrixXd distortion(di, di);
    for (Eigen::Index i = 0; i < di; ++i)
      for (Eigen::Index j = 0; j < di; ++j) distortion(i, j) = 2.0 * uniform01(rng) - 1.0;
    Eigen::RowVectorXd centroid(di);
    for (Eigen::Index j = 0; j < di; ++j) centroid(j) = vertices[c][j] * p.class_sep;
    const Eigen::MatrixXd z = gaussian_matrix(count, di, rng);
    ds.features.block(row, 0, count, di) = (z * distortion).rowwise() + centroid;
    for (Eigen::Index i = 0; i < count; ++i) ds.labels[static_cast<std::size_t>(row + i)] = c;
    row += count;
  }
  if (d > di) ds.features.rightCols(d - di) = gaussian_matrix(n, d - di, rng);
  ds.features = ds.features * random_rotation(d, rng);

  std::vector<std::size_t> order(p.n_points);
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);
  Eigen::MatrixXd shuffled(n, d);
  std::vector<Label> labels(p.n_points);
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(order[i]));
    labels[i] = ds.labels[order[i]];
  }
  ds.features = std::move(shuffled);
  ds.labels = std::move(labels);
  return ds;
}

Dataset load_feature_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
      } catch (const std::exception&) {
        throw std::invalid_argument("feature file line " + std::to_string(lineno) +
                                    ": malformed number '" + field + "'");
      }
    }
    if (values.size() < 2)
      throw std::invalid_argument("feature file line " + std::to_string(lineno) +
                                  ": need a label and at least one feature");
    if (width == 0) width = values.size();
    if (values.size() != width)
      throw std::invalid_argument("feature file line " + std::to_string(lineno) +
                                  ": inconsistent column count");
    const double l = values.front();
    if (l < 0 || l != std::floor(l))
      throw std::invalid_argument("feature file line " + std::to_string(lineno) +
                                  ": label must be a non-negative integer");
    labels.push_back(static_cast<Label>(l));
    values.erase(values.begin());
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::invalid_argument("feature file has no rows");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width - 1; ++j)
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  ds.labels = std::move(labels);
  ds.n_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  if (ds.n_classes < 2) ds.n_classes = 2;
  ds.params.n_points = rows.size();
  ds.params.n_features = width - 1;
  ds.params.n_informative = width - 1;
  ds.params.n_classes = ds.n_classes;
  return ds;
}

Dataset load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  return load_feature_csv(in);
}

HoldoutSplit holdout_split(std::size_t n_points, double holdout_fraction, Rng& rng) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("holdout_fraction must lie in (0,1)");
  std::vector<PointId> ids(n_points);
  std::iota(ids.begin(), ids.end(), PointId{0});
  shuffle_in_place(ids, rng);
  auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n_points)));
  n_hold = std::clamp<std::size_t>(n_hold, 1, n_points > 1 ? n_points - 1 : 1);
  HoldoutSplit split;
  split.holdout.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_hold));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_hold), ids.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace clamshell
