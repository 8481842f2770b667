#include "clamshell/learning.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace clamshell {

std::optional<Label> LabelCache::get(PointId id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

bool LabelCache::put(PointId id, Label label) { return labels_.emplace(id, label).second; }

double margin(const Eigen::RowVectorXd& probabilities) {
  if (probabilities.size() < 2) return 1.0;
  double first = -1.0, second = -1.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    const double v = probabilities(i);
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

namespace {

// First n entries of a partial Fisher-Yates shuffle of `ids`.
std::vector<PointId> sample_without_replacement(std::vector<PointId> ids, std::size_t n, Rng& rng) {
  n = std::min(n, ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng() % (ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  return ids;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& features, std::span<const PointId> ids) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), features.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(ids[i]));
  return out;
}

}  // namespace

std::vector<PointId> uncertainty_rank(const Classifier& model, const Eigen::MatrixXd& features,
                                      std::span<const PointId> unlabeled,
                                      std::size_t candidate_sample_size, Rng& rng) {
  std::vector<PointId> candidates(unlabeled.begin(), unlabeled.end());
  if (candidate_sample_size < candidates.size())
    candidates = sample_without_replacement(std::move(candidates), candidate_sample_size, rng);
  if (candidates.empty()) return {};
  const Eigen::MatrixXd probs = model.predict_proba(gather_rows(features, candidates));
  std::vector<std::pair<double, PointId>> scored;
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    scored.emplace_back(margin(probs.row(static_cast<Eigen::Index>(i))), candidates[i]);
  std::sort(scored.begin(), scored.end());
  std::vector<PointId> ranked;
  ranked.reserve(scored.size());
  for (const auto& [m, id] : scored) ranked.push_back(id);
  return ranked;
}

std::vector<PointId> uncertainty_select(const Classifier& model, const Eigen::MatrixXd& features,
                                        std::span<const PointId> unlabeled, std::size_t k,
                                        std::size_t candidate_sample_size, Rng& rng) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (candidate_sample_size < k) throw std::invalid_argument("candidate_sample_size must be >= k");
  auto ranked = uncertainty_rank(model, features, unlabeled, candidate_sample_size, rng);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

HybridSelection hybrid_select(const Classifier* model, const Eigen::MatrixXd& features,
                              std::span<const PointId> unlabeled, const LabelCache& cache,
                              std::size_t k, std::size_t p, std::size_t candidate_sample_size,
                              Rng& rng, const std::vector<PointId>* frontier) {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (k > p) throw std::invalid_argument("k must not exceed p");

  HybridSelection out;
  std::vector<PointId> available;
  available.reserve(unlabeled.size());
  for (PointId id : unlabeled) {
    if (cache.contains(id)) ++out.cache_hits;
    else available.push_back(id);
  }

  const std::size_t k_eff = std::min(k, available.size());
  std::set<PointId> chosen;
  if (k_eff > 0 && model == nullptr) {
    out.active = sample_without_replacement(available, k_eff, rng);
    chosen.insert(out.active.begin(), out.active.end());
  } else if (k_eff > 0) {
    const std::set<PointId> open(available.begin(), available.end());
    if (frontier) {
      for (PointId id : *frontier) {
        if (out.active.size() == k_eff) break;
        if (cache.contains(id)) {
          ++out.cache_hits;
          continue;
        }
        if (open.count(id) && chosen.insert(id).second) out.active.push_back(id);
      }
    }
    if (out.active.size() < k_eff) {
      std::vector<PointId> rest;
      for (PointId id : available)
        if (!chosen.count(id)) rest.push_back(id);
      const std::size_t need = k_eff - out.active.size();
      for (PointId id : uncertainty_select(*model, features, rest, need,
                                           std::max(candidate_sample_size, need), rng)) {
        chosen.insert(id);
        out.active.push_back(id);
      }
    }
  }

  std::vector<PointId> rest;
  for (PointId id : available)
    if (!chosen.count(id)) rest.push_back(id);
  out.passive = sample_without_replacement(std::move(rest), p - k, rng);
  return out;
}

std::size_t set_active_batch(std::size_t p, double r) {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("r must lie in [0,1]");
  auto k = static_cast<std::size_t>(std::llround(r * static_cast<double>(p)));
  k = std::clamp<std::size_t>(k, 1, p);
  if (p >= 20) k = std::clamp<std::size_t>(k, 10, std::min<std::size_t>(40, p));
  return k;
}

double decision_latency(const RetrainOptions& options, std::size_t n_labels) {
  return options.base_s + options.per_label_s * static_cast<double>(n_labels);
}

std::optional<double> async_retrain_tick(LearnState& state, std::span<const LabeledPoint> newly,
                                         double now, const RetrainOptions& options) {
  for (const auto& lp : newly)
    if (state.labeled.put(lp.point, lp.label)) state.sources[lp.point] = lp.source;
  if (state.in_flight) {
    if (!newly.empty()) state.labels_since_snapshot = true;
    return std::nullopt;
  }
  if (state.labeled.size() == 0) return std::nullopt;
  RetrainJob job;
  for (const auto& [id, label] : state.labeled.entries()) job.snapshot.push_back(id);
  job.started_at = now;
  job.done_at = now + decision_latency(options, job.snapshot.size());
  state.in_flight = std::move(job);
  state.labels_since_snapshot = false;
  return state.in_flight->done_at;
}

Classifier fit_labeled(const LearnState& state, std::span<const PointId> points,
                       const LearningProblem& problem) {
  const Dataset& data = *problem.data;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), data.features.cols());
  std::vector<Label> y;
  std::vector<double> w;
  for (std::size_t i = 0; i < points.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(points[i]));
    y.push_back(*state.labeled.get(points[i]));
    auto src = state.sources.find(points[i]);
    const bool active = src != state.sources.end() && src->second == LabelSource::active;
    w.push_back(active ? problem.active_weight : 1.0);
  }
  return train(x, y, w, data.n_classes, problem.train);
}

double holdout_accuracy(const Classifier& model, const LearningProblem& problem) {
  const Dataset& data = *problem.data;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(problem.holdout.size()), data.features.cols());
  std::vector<Label> y;
  for (std::size_t i = 0; i < problem.holdout.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        data.features.row(static_cast<Eigen::Index>(problem.holdout[i]));
    y.push_back(data.labels[problem.holdout[i]]);
  }
  return evaluate(model, x, y);
}

std::optional<double> complete_retrain(LearnState& state, const LearningProblem& problem,
                                       double now, const RetrainOptions& options, Rng& rng) {
  if (!state.in_flight) throw std::logic_error("no retrain in flight");
  RetrainJob job = std::move(*state.in_flight);
  state.in_flight.reset();
  state.model = fit_labeled(state, job.snapshot, problem);
  ++state.model_version;

  std::vector<PointId> unlabeled;
  for (PointId id : problem.pool)
    if (!state.labeled.contains(id)) unlabeled.push_back(id);
  state.frontier.ranked = uncertainty_rank(state.model, problem.data->features, unlabeled,
                                           problem.candidate_sample_size, rng);
  state.frontier.model_version = state.model_version;

  if (!state.labels_since_snapshot) return std::nullopt;
  return async_retrain_tick(state, {}, now, options);
}

}  // namespace clamshell
