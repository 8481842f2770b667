#include "clamshell/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clamshell {

Classifier::Classifier(Eigen::Index n_features, int n_classes)
    : weights_(Eigen::MatrixXd::Zero(n_classes, n_features)),
      bias_(Eigen::VectorXd::Zero(n_classes)),
      mean_(Eigen::RowVectorXd::Zero(n_features)),
      scale_(Eigen::RowVectorXd::Ones(n_features)) {
  if (n_classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
}

Classifier Classifier::constant(Eigen::Index n_features, int n_classes, Label label) {
  Classifier c(n_features, n_classes);
  if (label < 0 || label >= n_classes) throw std::invalid_argument("constant label out of range");
  c.bias_(label) = 1.0;
  return c;
}

Classifier Classifier::random(Eigen::Index n_features, int n_classes, Rng& rng) {
  Classifier c(n_features, n_classes);
  for (Eigen::Index i = 0; i < c.weights_.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.weights_.cols(); ++j) c.weights_(i, j) = standard_normal(rng);
    c.bias_(i) = standard_normal(rng);
  }
  return c;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Eigen::MatrixXd Classifier::predict_proba(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights_.cols()) throw std::invalid_argument("feature count mismatch");
  const Eigen::MatrixXd z = (x.rowwise() - mean_).array().rowwise() / scale_.array();
  Eigen::MatrixXd logits = z * weights_.transpose();
  logits.rowwise() += bias_.transpose();
  return softmax_rows(logits);
}

Eigen::RowVectorXd Classifier::predict_proba_row(const Eigen::RowVectorXd& x) const {
  return predict_proba(Eigen::MatrixXd(x)).row(0);
}

std::vector<Label> Classifier::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd p = predict_proba(x);
  std::vector<Label> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<Label>(best);
  }
  return out;
}

namespace {

void check_inputs(const Eigen::MatrixXd& x, std::span<const Label> y, std::span<const double> w,
                  int n_classes) {
  if (x.rows() == 0) throw std::invalid_argument("empty training set");
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() != w.size())
    throw std::invalid_argument("features, labels and weights differ in length");
  for (double wi : w)
    if (!(wi > 0.0) || !std::isfinite(wi)) throw std::invalid_argument("weights must be positive");
  for (Label l : y)
    if (l < 0 || l >= n_classes) throw std::invalid_argument("label out of range");
}

Eigen::MatrixXd augmented(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

Eigen::MatrixXd loss_gradient(const Eigen::MatrixXd& params, const Eigen::MatrixXd& xa,
                              std::span<const Label> y, const Eigen::VectorXd& w, double l2) {
  Eigen::MatrixXd p = softmax_rows(xa * params.transpose());
  for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  p.array().colwise() *= (w / w.sum()).array();
  Eigen::MatrixXd g = p.transpose() * xa;
  g.leftCols(g.cols() - 1) += l2 * params.leftCols(params.cols() - 1);
  return g;
}

}  // namespace

double weighted_loss(const Eigen::MatrixXd& params, const Eigen::MatrixXd& x,
                     std::span<const Label> y, std::span<const double> w, double l2) {
  check_inputs(x, y, w, static_cast<int>(params.rows()));
  const Eigen::MatrixXd logits = augmented(x) * params.transpose();
  double total = 0.0, wsum = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += w[static_cast<std::size_t>(i)] * (lse - logits(i, y[static_cast<std::size_t>(i)]));
    wsum += w[static_cast<std::size_t>(i)];
  }
  const auto wpart = params.leftCols(params.cols() - 1);
  return total / wsum + 0.5 * l2 * wpart.squaredNorm();
}

Eigen::MatrixXd weighted_loss_gradient(const Eigen::MatrixXd& params, const Eigen::MatrixXd& x,
                                       std::span<const Label> y, std::span<const double> w,
                                       double l2) {
  check_inputs(x, y, w, static_cast<int>(params.rows()));
  const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return loss_gradient(params, augmented(x), y, wv, l2);
}

Classifier train(const Eigen::MatrixXd& x, std::span<const Label> y, std::span<const double> w,
                 int n_classes, const TrainOptions& options) {
  check_inputs(x, y, w, n_classes);
  Classifier model(x.cols(), n_classes);

  if (std::all_of(y.begin(), y.end(), [&](Label l) { return l == y.front(); })) {
    model = Classifier::constant(x.cols(), n_classes, y.front());
    model.warning_ = "single-class training set; using a constant classifier";
    return model;
  }

  model.mean_ = x.colwise().mean();
  const Eigen::RowVectorXd var =
      (x.rowwise() - model.mean_).array().square().colwise().mean();
  model.scale_ = var.array().sqrt().max(1e-12).matrix();
  for (Eigen::Index j = 0; j < model.scale_.size(); ++j)
    if (model.scale_(j) <= 1e-12) model.scale_(j) = 1.0;
  const Eigen::MatrixXd z = (x.rowwise() - model.mean_).array().rowwise() / model.scale_.array();
  const Eigen::MatrixXd xa = augmented(z);
  const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));

  Eigen::MatrixXd params = Eigen::MatrixXd::Zero(n_classes, x.cols() + 1);
  for (int e = 0; e < options.epochs; ++e)
    params -= options.learning_rate * loss_gradient(params, xa, y, wv, options.l2);

  model.weights_ = params.leftCols(x.cols());
  model.bias_ = params.col(x.cols());
  return model;
}

double evaluate(const Classifier& model, const Eigen::MatrixXd& x, std::span<const Label> y) {
  if (x.rows() == 0 || y.empty()) throw std::invalid_argument("empty holdout");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw std::invalid_argument("holdout features and labels differ in length");
  const auto pred = model.predict(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace clamshell
