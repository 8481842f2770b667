#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "clamshell/learning.hpp"

using namespace clamshell;

namespace {

double training_accuracy(const Dataset& d, const TrainOptions& opts = {}) {
  const std::vector<double> w(d.size(), 1.0);
  const Classifier model = train(d.features, d.labels, w, d.n_classes, opts);
  return evaluate(model, d.features, d.labels);
}

std::vector<PointId> iota_ids(std::size_t n) {
  std::vector<PointId> ids(n);
  std::iota(ids.begin(), ids.end(), PointId{0});
  return ids;
}

// Two classes along the first feature; rows are (x0, x1).
Dataset toy() {
  Dataset d;
  d.features.resize(4, 2);
  d.features << -2, 0.5, -1, -0.5, 1, 0.3, 2, -0.2;
  d.labels = {0, 0, 1, 1};
  d.n_classes = 2;
  return d;
}

}  // namespace

TEST(Dataset, EasyIsLinearlySeparable) {
  DatasetParams p;
  p.n_points = 500;
  p.class_sep = 10;
  p.seed = 3;
  EXPECT_GE(training_accuracy(generate_dataset(p)), 0.99);
}

TEST(Dataset, HardIsHarderThanEasy) {
  DatasetParams easy;
  easy.n_points = 500;
  easy.class_sep = 10;
  easy.seed = 3;
  DatasetParams hard = easy;
  hard.class_sep = 0.5;
  hard.n_features = 40;
  hard.n_informative = 5;
  EXPECT_LT(training_accuracy(generate_dataset(hard)), training_accuracy(generate_dataset(easy)));
}

TEST(Dataset, DeterministicAndWellFormed) {
  DatasetParams p;
  p.n_points = 300;
  p.n_features = 6;
  p.n_informative = 3;
  p.n_classes = 5;
  p.seed = 11;
  const Dataset a = generate_dataset(p), b = generate_dataset(p);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.features.rows(), 300);
  EXPECT_EQ(a.features.cols(), 6);
  EXPECT_TRUE(a.features.allFinite());
  std::set<Label> classes(a.labels.begin(), a.labels.end());
  EXPECT_EQ(classes, (std::set<Label>{0, 1, 2, 3, 4}));
  p.seed = 12;
  EXPECT_NE(generate_dataset(p).features, a.features);
}

TEST(Dataset, RejectsBadParameters) {
  DatasetParams p;
  p.n_informative = 3;
  EXPECT_THROW(generate_dataset(p), std::invalid_argument);
  p = {};
  p.n_classes = 1;
  EXPECT_THROW(generate_dataset(p), std::invalid_argument);
  p = {};
  p.class_sep = 0;
  EXPECT_THROW(generate_dataset(p), std::invalid_argument);
  p = {};
  p.n_informative = 1;
  p.n_classes = 3;
  EXPECT_THROW(generate_dataset(p), std::invalid_argument);
}

TEST(Dataset, LoadsFeatureCsv) {
  std::istringstream in("0,1.5,2\n1,-1,0.25\n2,0,0\n");
  const Dataset d = load_feature_csv(in);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.n_classes, 3);
  EXPECT_DOUBLE_EQ(d.features(1, 1), 0.25);
  std::istringstream ragged("0,1,2\n1,3\n");
  EXPECT_THROW(load_feature_csv(ragged), std::invalid_argument);
}

TEST(Dataset, HoldoutSplitPartitions) {
  Rng rng(1);
  const auto s = holdout_split(100, 0.2, rng);
  EXPECT_EQ(s.holdout.size(), 20u);
  EXPECT_EQ(s.train.size(), 80u);
  std::set<PointId> all(s.train.begin(), s.train.end());
  all.insert(s.holdout.begin(), s.holdout.end());
  EXPECT_EQ(all.size(), 100u);
}

TEST(Classifier, GradientMatchesCentralDifferences) {
  Rng gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(gen() % 10), d = 1 + static_cast<int>(gen() % 4);
    const int c = 2 + static_cast<int>(gen() % 3);
    Eigen::MatrixXd x(n, d), params(c, d + 1);
    std::vector<Label> y;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = standard_normal(gen);
      y.push_back(static_cast<Label>(gen() % c));
      w.push_back(0.2 + uniform01(gen));
    }
    for (int i = 0; i < c; ++i)
      for (int j = 0; j <= d; ++j) params(i, j) = standard_normal(gen);
    const double l2 = 0.1 * uniform01(gen);
    const Eigen::MatrixXd g = weighted_loss_gradient(params, x, y, w, l2);
    Eigen::MatrixXd numeric(c, d + 1);
    const double h = 1e-5;
    for (int i = 0; i < c; ++i)
      for (int j = 0; j <= d; ++j) {
        Eigen::MatrixXd up = params, down = params;
        up(i, j) += h;
        down(i, j) -= h;
        numeric(i, j) = (weighted_loss(up, x, y, w, l2) - weighted_loss(down, x, y, w, l2)) / (2 * h);
      }
    const double rel = (g - numeric).norm() / std::max(1e-12, g.norm() + numeric.norm());
    EXPECT_LT(rel, 1e-5) << "trial " << trial;
  }
}

TEST(Classifier, ProbabilitiesSumToOne) {
  Rng gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 2 + static_cast<int>(gen() % 8);
    const Classifier m = Classifier::random(4, c, gen);
    Eigen::MatrixXd x(50, 4);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 4; ++j) x(i, j) = 100 * standard_normal(gen);
    const Eigen::MatrixXd p = m.predict_proba(x);
    for (int i = 0; i < 50; ++i) {
      EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-6);
      EXPECT_GE(p.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(Classifier, SeparableToyIsFitExactly) {
  const Dataset d = toy();
  EXPECT_DOUBLE_EQ(training_accuracy(d), 1.0);
}

TEST(Classifier, UniformWeightScalingLeavesPredictionsUnchanged) {
  DatasetParams p;
  p.n_points = 200;
  p.n_features = 5;
  p.n_informative = 3;
  p.n_classes = 3;
  p.class_sep = 1.5;
  p.seed = 9;
  const Dataset d = generate_dataset(p);
  Rng gen(2);
  std::vector<double> w, w2;
  for (std::size_t i = 0; i < d.size(); ++i) {
    w.push_back(0.5 + uniform01(gen));
    w2.push_back(2 * w.back());
  }
  const Classifier a = train(d.features, d.labels, w, 3), b = train(d.features, d.labels, w2, 3);
  EXPECT_EQ(a.predict(d.features), b.predict(d.features));
  EXPECT_LT((a.predict_proba(d.features) - b.predict_proba(d.features)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Classifier, RejectsBadTrainingInput) {
  const Eigen::MatrixXd empty(0, 2);
  EXPECT_THROW(train(empty, std::vector<Label>{}, std::vector<double>{}, 2), std::invalid_argument);
  const Dataset d = toy();
  EXPECT_THROW(train(d.features, d.labels, std::vector<double>{1, 1, 0, 1}, 2), std::invalid_argument);
  EXPECT_THROW(train(d.features, std::vector<Label>{0, 0, 1, 2}, std::vector<double>(4, 1.0), 2),
               std::invalid_argument);
}

TEST(Classifier, SingleClassGivesConstantModelWithWarning) {
  const Dataset d = toy();
  const Classifier m = train(d.features, std::vector<Label>{1, 1, 1, 1}, std::vector<double>(4, 1.0), 3);
  ASSERT_TRUE(m.warning());
  for (Label l : m.predict(d.features)) EXPECT_EQ(l, 1);
}

TEST(Classifier, TrainingIsDeterministic) {
  DatasetParams p;
  p.n_points = 100;
  p.seed = 4;
  const Dataset d = generate_dataset(p);
  const std::vector<double> w(d.size(), 1.0);
  const Classifier a = train(d.features, d.labels, w, 2), b = train(d.features, d.labels, w, 2);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.bias(), b.bias());
}

TEST(Evaluate, Examples) {
  const Dataset d = toy();
  EXPECT_DOUBLE_EQ(evaluate(Classifier::constant(2, 2, 0), d.features, d.labels), 0.5);
  const std::vector<double> w(4, 1.0);
  EXPECT_DOUBLE_EQ(evaluate(train(d.features, d.labels, w, 2), d.features, d.labels), 1.0);
  EXPECT_THROW(evaluate(Classifier(2, 2), Eigen::MatrixXd(0, 2), std::vector<Label>{}),
               std::invalid_argument);
}

TEST(Evaluate, RandomModelOnTenClassesIsNearChance) {
  DatasetParams p;
  p.n_points = 1000;
  p.n_features = 6;
  p.n_informative = 4;
  p.n_classes = 10;
  p.seed = 1;
  const Dataset d = generate_dataset(p);
  double total = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    total += evaluate(Classifier::random(6, 10, rng), d.features, d.labels);
  }
  EXPECT_NEAR(total / seeds, 0.10, 0.03);
}

TEST(Margin, Definition) {
  Eigen::RowVectorXd p(3);
  p << 0.2, 0.5, 0.3;
  EXPECT_NEAR(margin(p), 0.2, 1e-12);
}

TEST(Uncertainty, PicksTheUndecidedPoint) {
  Dataset d = toy();
  const Classifier m = train(d.features, d.labels, std::vector<double>(4, 1.0), 2);
  Eigen::MatrixXd x(2, 2);
  x << 100, 0, 0.0, 0.0;
  const Eigen::RowVectorXd far = m.predict_proba_row(x.row(0));
  const Eigen::RowVectorXd near = m.predict_proba_row(x.row(1));
  ASSERT_GT(margin(far), margin(near));
  const std::vector<PointId> ids{0, 1};
  Rng rng(1);
  EXPECT_EQ(uncertainty_select(m, x, ids, 1, 2, rng), std::vector<PointId>{1});
  EXPECT_EQ(uncertainty_select(m, x, ids, 5, 5, rng).size(), 2u);
  EXPECT_THROW(uncertainty_select(m, x, ids, 0, 5, rng), std::invalid_argument);
  EXPECT_THROW(uncertainty_select(m, x, ids, 3, 2, rng), std::invalid_argument);
}

TEST(Uncertainty, FullCandidateSampleMatchesExhaustiveScoring) {
  Rng gen(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + gen() % 200;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = standard_normal(gen);
    const Classifier m = Classifier::random(3, 3, gen);
    std::vector<PointId> ids = iota_ids(n);
    const std::size_t k = 1 + gen() % n;

    std::vector<std::pair<double, PointId>> scored;
    for (PointId id : ids) scored.emplace_back(margin(m.predict_proba_row(x.row(static_cast<Eigen::Index>(id)))), id);
    std::sort(scored.begin(), scored.end());
    std::vector<PointId> oracle;
    for (std::size_t i = 0; i < k; ++i) oracle.push_back(scored[i].second);

    Rng rng(gen());
    EXPECT_EQ(uncertainty_select(m, x, ids, k, n, rng), oracle);
  }
}

TEST(Hybrid, SizesAndBoundaries) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(100, 2);
  const auto ids = iota_ids(100);
  const Classifier m = Classifier::random(2, 2, *std::make_unique<Rng>(3));
  LabelCache cache;
  Rng rng(1);
  auto s = hybrid_select(&m, x, ids, cache, 7, 15, 1000, rng);
  EXPECT_EQ(s.active.size(), 7u);
  EXPECT_EQ(s.passive.size(), 8u);
  s = hybrid_select(&m, x, ids, cache, 0, 15, 1000, rng);
  EXPECT_EQ(s.active.size(), 0u);
  EXPECT_EQ(s.passive.size(), 15u);
  s = hybrid_select(&m, x, ids, cache, 15, 15, 1000, rng);
  EXPECT_EQ(s.active.size(), 15u);
  EXPECT_EQ(s.passive.size(), 0u);
  EXPECT_THROW(hybrid_select(&m, x, ids, cache, 16, 15, 1000, rng), std::invalid_argument);
}

TEST(Hybrid, DisjointUncachedAndSizedByRemainingPool) {
  Rng gen(8);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(60, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + gen() % 60;
    const auto ids = iota_ids(n);
    LabelCache cache;
    for (PointId id : ids)
      if (uniform01(gen) < 0.4) cache.put(id, 0);
    const std::size_t p = 1 + gen() % 30, k = gen() % (p + 1);
    const Classifier m = Classifier::random(2, 2, gen);
    std::vector<PointId> frontier;
    if (gen() % 2)
      for (std::size_t i = 0; i < n; ++i) frontier.push_back(static_cast<PointId>(gen() % n));
    const bool with_model = gen() % 3 != 0;
    Rng rng(gen());
    const auto s = hybrid_select(with_model ? &m : nullptr, x, ids, cache, k, p, 20, rng,
                                 frontier.empty() ? nullptr : &frontier);
    std::set<PointId> all;
    for (PointId id : s.active) {
      EXPECT_FALSE(cache.contains(id));
      EXPECT_TRUE(all.insert(id).second);
    }
    for (PointId id : s.passive) {
      EXPECT_FALSE(cache.contains(id));
      EXPECT_TRUE(all.insert(id).second);
    }
    const std::size_t uncached = n - cache.size();
    EXPECT_EQ(all.size(), std::min(p, uncached));
    EXPECT_EQ(s.active.size(), std::min(k, uncached));
  }
}

TEST(Hybrid, FrontierOrderIsUsedFirst) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
  const auto ids = iota_ids(10);
  const Classifier m = Classifier::random(2, 2, *std::make_unique<Rng>(1));
  LabelCache cache;
  cache.put(4, 1);
  const std::vector<PointId> frontier{4, 7, 2, 9};
  Rng rng(1);
  const auto s = hybrid_select(&m, x, ids, cache, 2, 5, 100, rng, &frontier);
  EXPECT_EQ(s.active, (std::vector<PointId>{7, 2}));
  EXPECT_GE(s.cache_hits, 1u);
}

TEST(LabelCache, WriteOnce) {
  LabelCache c;
  EXPECT_TRUE(c.put(3, 1));
  EXPECT_FALSE(c.put(3, 0));
  EXPECT_EQ(c.get(3), std::optional<Label>(1));
  EXPECT_FALSE(c.get(4));
}

TEST(SetActiveBatch, Examples) {
  EXPECT_EQ(set_active_batch(20), 10u);
  EXPECT_EQ(set_active_batch(1), 1u);
  EXPECT_EQ(set_active_batch(16, 0.25), 4u);
  EXPECT_EQ(set_active_batch(100), 40u);
  EXPECT_EQ(set_active_batch(30, 0.1), 10u);
  EXPECT_EQ(set_active_batch(3, 0.0), 1u);
  EXPECT_THROW(set_active_batch(0), std::invalid_argument);
}

class AsyncRetrain : public ::testing::Test {
 protected:
  void SetUp() override {
    DatasetParams p;
    p.n_points = 200;
    p.class_sep = 3;
    p.seed = 2;
    data = generate_dataset(p);
    problem.data = &data;
    problem.pool = iota_ids(200);
    problem.candidate_sample_size = 50;
  }

  std::vector<LabeledPoint> labels(PointId from, PointId to) const {
    std::vector<LabeledPoint> out;
    for (PointId id = from; id < to; ++id)
      out.push_back({id, data.labels[id], LabelSource::passive});
    return out;
  }

  Dataset data;
  LearningProblem problem;
  LearnState state;
  Rng rng{4};
};

TEST_F(AsyncRetrain, SelectionUsesStaleFrontierWhileRetraining) {
  const RetrainOptions opts{0.0, 1.0};
  auto done = async_retrain_tick(state, labels(0, 10), 0.0, opts);
  ASSERT_TRUE(done);
  EXPECT_DOUBLE_EQ(*done, 10.0);
  EXPECT_FALSE(complete_retrain(state, problem, *done, opts, rng));
  EXPECT_EQ(state.model_version, 1u);
  EXPECT_EQ(state.frontier.model_version, 1u);

  done = async_retrain_tick(state, labels(10, 30), 12.0, opts);
  ASSERT_TRUE(done);
  const Frontier stale = state.frontier;
  // Two more batches land during the retrain and both see version 1.
  EXPECT_FALSE(async_retrain_tick(state, labels(30, 40), 15.0, opts));
  EXPECT_EQ(state.frontier.model_version, 1u);
  EXPECT_FALSE(async_retrain_tick(state, labels(40, 50), 20.0, opts));
  EXPECT_EQ(state.frontier.ranked, stale.ranked);
  EXPECT_LE(state.frontier.model_version, state.model_version);

  const auto follow = complete_retrain(state, problem, *done, opts, rng);
  EXPECT_EQ(state.model_version, 2u);
  ASSERT_TRUE(follow);
  EXPECT_DOUBLE_EQ(*follow, *done + 50.0);
}

TEST_F(AsyncRetrain, ZeroLatencyKeepsFrontierCurrent) {
  const RetrainOptions opts{0.0, 0.0};
  for (PointId b = 0; b < 5; ++b) {
    const auto done = async_retrain_tick(state, labels(b * 10, b * 10 + 10), b * 5.0, opts);
    ASSERT_TRUE(done);
    EXPECT_DOUBLE_EQ(*done, b * 5.0);
    EXPECT_FALSE(complete_retrain(state, problem, *done, opts, rng));
    EXPECT_EQ(state.frontier.model_version, state.model_version);
    EXPECT_EQ(state.model_version, b + 1);
    for (PointId id : state.frontier.ranked) EXPECT_FALSE(state.labeled.contains(id));
  }
}

TEST_F(AsyncRetrain, ActiveWeightAppliesOnlyToActiveLabels) {
  state.labeled.put(0, data.labels[0]);
  state.labeled.put(1, data.labels[1]);
  state.sources[0] = LabelSource::active;
  state.sources[1] = LabelSource::passive;
  EXPECT_EQ(decision_latency(RetrainOptions{2.0, 0.5}, 10), 7.0);
  problem.active_weight = 0.5;
  const std::vector<PointId> pts{0, 1};
  EXPECT_NO_THROW(fit_labeled(state, pts, problem));
}

// Pure active selection needs no more labels than passive on an easy problem.
TEST(ConvergenceOrdering, ActiveNoWorseThanPassiveOnEasyData) {
  auto labels_to_target = [](std::uint64_t seed, bool active) {
    DatasetParams p;
    p.n_points = 1000;
    p.class_sep = 8;
    p.seed = seed;
    const Dataset d = generate_dataset(p);
    Rng rng(seed * 7 + 1);
    const auto split = holdout_split(d.size(), 0.2, rng);
    LearningProblem prob;
    prob.data = &d;
    prob.pool = split.train;
    prob.holdout = split.holdout;
    LearnState st;
    std::optional<Classifier> model;
    for (std::size_t round = 1; round <= 20; ++round) {
      std::vector<PointId> open;
      for (PointId id : prob.pool)
        if (!st.labeled.contains(id)) open.push_back(id);
      const auto sel = hybrid_select(model ? &*model : nullptr, d.features, open, st.labeled,
                                     active ? 20 : 0, 20, 1000, rng);
      for (auto ids : {sel.active, sel.passive})
        for (PointId id : ids) st.labeled.put(id, d.labels[id]);
      std::vector<PointId> all;
      for (const auto& [id, l] : st.labeled.entries()) all.push_back(id);
      model = fit_labeled(st, all, prob);
      if (holdout_accuracy(*model, prob) >= 0.98) return st.labeled.size();
    }
    return std::size_t{1000};
  };
  std::vector<std::size_t> al, pl;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    al.push_back(labels_to_target(s, true));
    pl.push_back(labels_to_target(s, false));
  }
  std::sort(al.begin(), al.end());
  std::sort(pl.begin(), pl.end());
  EXPECT_LE(al[10], pl[10]);
}
