#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "clamshell/classifier.hpp"
#include "clamshell/dataset.hpp"
#include "clamshell/rng.hpp"

namespace clamshell {

enum class LabelSource { active, passive };

/// Crowd labels by point. Write-once: a point keeps its first label.
class LabelCache {
 public:
  bool contains(PointId id) const { return labels_.count(id) != 0; }
  std::optional<Label> get(PointId id) const;
  // Returns false, leaving the cache untouched, if the point is already labeled.
  bool put(PointId id, Label label);
  std::size_t size() const noexcept { return labels_.size(); }
  const std::map<PointId, Label>& entries() const noexcept { return labels_; }

 private:
  std::map<PointId, Label> labels_;
};

// Top-1 minus top-2 probability; smaller means less certain.
double margin(const Eigen::RowVectorXd& probabilities);

/// Scores a uniform sample of `candidate_sample_size` points from `unlabeled`
/// by margin and returns the k least certain, ties by point id. Returns all
/// points when fewer than k are available.
std::vector<PointId> uncertainty_select(const Classifier& model, const Eigen::MatrixXd& features,
                                        std::span<const PointId> unlabeled, std::size_t k,
                                        std::size_t candidate_sample_size, Rng& rng);

// Every candidate in the sample, most uncertain first.
std::vector<PointId> uncertainty_rank(const Classifier& model, const Eigen::MatrixXd& features,
                                      std::span<const PointId> unlabeled,
                                      std::size_t candidate_sample_size, Rng& rng);

struct HybridSelection {
  std::vector<PointId> active;
  std::vector<PointId> passive;
  std::size_t cache_hits = 0;  // selections answered from the cache and replaced
};

/// k actively chosen points plus max(0, p - k) random ones, disjoint and
/// uncached. Active points come from `frontier` in rank order when given, then
/// from fresh uncertainty selection. Without a model active points are random.
HybridSelection hybrid_select(const Classifier* model, const Eigen::MatrixXd& features,
                              std::span<const PointId> unlabeled, const LabelCache& cache,
                              std::size_t k, std::size_t p, std::size_t candidate_sample_size,
                              Rng& rng, const std::vector<PointId>* frontier = nullptr);

// round(r p) clamped to [1, p], then into [10, 40] once p >= 20.
std::size_t set_active_batch(std::size_t p, double r = 0.5);

struct Frontier {
  std::vector<PointId> ranked;
  std::uint64_t model_version = 0;
};

struct RetrainOptions {
  double base_s = 0.0;
  double per_label_s = 0.05;

  bool operator==(const RetrainOptions&) const = default;
};

double decision_latency(const RetrainOptions& options, std::size_t n_labels);

struct RetrainJob {
  std::vector<PointId> snapshot;
  double started_at = 0.0;
  double done_at = 0.0;
};

struct LearnState {
  LabelCache labeled;
  std::map<PointId, LabelSource> sources;
  Classifier model;
  std::uint64_t model_version = 0;
  Frontier frontier;
  std::optional<RetrainJob> in_flight;
  bool labels_since_snapshot = false;
};

struct LabeledPoint {
  PointId point = 0;
  Label label = 0;
  LabelSource source = LabelSource::passive;
};

/// Fixed inputs to retraining.
struct LearningProblem {
  const Dataset* data = nullptr;
  std::vector<PointId> pool;     // selectable points
  std::vector<PointId> holdout;
  TrainOptions train;
  std::size_t candidate_sample_size = 1000;
  double active_weight = 1.0;    // relative to passive points
};

/// Caches new labels and starts a retrain on everything labeled so far unless
/// one is already running. Returns the new retrain's completion time.
std::optional<double> async_retrain_tick(LearnState& state, std::span<const LabeledPoint> newly,
                                         double now, const RetrainOptions& options);

/// Completes the running retrain: fits on its snapshot, bumps the version and
/// recomputes the frontier. Starts a follow-up retrain when labels arrived in
/// the meantime and returns its completion time.
std::optional<double> complete_retrain(LearnState& state, const LearningProblem& problem,
                                       double now, const RetrainOptions& options, Rng& rng);

// Model fit on the given labeled points with source weights applied.
Classifier fit_labeled(const LearnState& state, std::span<const PointId> points,
                       const LearningProblem& problem);

double holdout_accuracy(const Classifier& model, const LearningProblem& problem);

}  // namespace clamshell
