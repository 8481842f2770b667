#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clamshell/rng.hpp"
#include "clamshell/scheduler.hpp"

namespace clamshell {

struct TrainOptions {
  double l2 = 1e-4;
  double learning_rate = 0.5;
  int epochs = 200;

  bool operator==(const TrainOptions&) const = default;
};

/// Multinomial logistic regression on standardized features.
class Classifier {
 public:
  Classifier() = default;
  // Untrained model: uniform probabilities, argmax class 0.
  Classifier(Eigen::Index n_features, int n_classes);

  static Classifier constant(Eigen::Index n_features, int n_classes, Label label);
  static Classifier random(Eigen::Index n_features, int n_classes, Rng& rng);

  int n_classes() const noexcept { return static_cast<int>(weights_.rows()); }
  Eigen::Index n_features() const noexcept { return weights_.cols(); }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
  Eigen::RowVectorXd predict_proba_row(const Eigen::RowVectorXd& x) const;
  std::vector<Label> predict(const Eigen::MatrixXd& x) const;

  const Eigen::MatrixXd& weights() const noexcept { return weights_; }  // classes x features
  const Eigen::VectorXd& bias() const noexcept { return bias_; }
  const std::optional<std::string>& warning() const noexcept { return warning_; }

 private:
  friend Classifier train(const Eigen::MatrixXd&, std::span<const Label>, std::span<const double>,
                          int, const TrainOptions&);

  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
  std::optional<std::string> warning_;
};

// Row-wise softmax of `logits`.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// Weighted mean cross-entropy plus (l2/2)||W||^2 (bias unpenalized).
/// `params` is classes x (features + 1), last column the bias.
double weighted_loss(const Eigen::MatrixXd& params, const Eigen::MatrixXd& x,
                     std::span<const Label> y, std::span<const double> w, double l2);
Eigen::MatrixXd weighted_loss_gradient(const Eigen::MatrixXd& params, const Eigen::MatrixXd& x,
                                       std::span<const Label> y, std::span<const double> w,
                                       double l2);

/// Full-batch gradient descent from zero weights. Throws std::invalid_argument
/// on an empty set, mismatched sizes, non-positive weights or out-of-range
/// labels. A single-class set yields a constant classifier with a warning.
Classifier train(const Eigen::MatrixXd& x, std::span<const Label> y, std::span<const double> w,
                 int n_classes, const TrainOptions& options = {});

// Fraction of rows whose argmax matches. Throws on an empty holdout.
double evaluate(const Classifier& model, const Eigen::MatrixXd& x, std::span<const Label> y);

}  // namespace clamshell
