#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "clamshell/rng.hpp"
#include "clamshell/scheduler.hpp"

namespace clamshell {

struct DatasetParams {
  std::size_t n_points = 1000;
  std::size_t n_features = 2;
  std::size_t n_informative = 2;
  double class_sep = 1.0;
  int n_classes = 2;
  std::uint64_t seed = 0;

  bool operator==(const DatasetParams&) const = default;
};

/// Labeled feature matrix, one row per point.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<Label> labels;
  int n_classes = 2;
  DatasetParams params;  // generator settings; n_points/n_features only for loaded data

  std::size_t size() const noexcept { return labels.size(); }
};

/// Gaussian clusters around class centroids placed on distinct vertices of a
/// hypercube of half-side class_sep in the informative subspace, each with a
/// random linear distortion; the remaining features are N(0,1) noise and the
/// whole space is randomly rotated. Throws std::invalid_argument on bad
/// parameters, including 2^n_informative < n_classes.
Dataset generate_dataset(const DatasetParams& params);

// `label,f1,...,fd` rows, no header; labels must be 0..C-1.
Dataset load_feature_csv(std::istream& in);
Dataset load_feature_csv(const std::filesystem::path& path);

struct HoldoutSplit {
  std::vector<PointId> train;
  std::vector<PointId> holdout;
};

HoldoutSplit holdout_split(std::size_t n_points, double holdout_fraction, Rng& rng);

}  // namespace clamshell
