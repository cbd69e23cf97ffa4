#include <doctest.h>

#include <cmath>

#include "mcpeval/classifier.hpp"
#include "mcpeval/error.hpp"
#include "mcpeval/metrics.hpp"
#include "mcpeval/random.hpp"
#include "test_support.hpp"

using namespace mcpeval;
using mcpeval::testing::error_code_of;

namespace {

Dataset one_class(std::size_t n) {
  std::vector<LabeledInstance> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({{static_cast<double>(i)}, Label::Positive, std::to_string(i)});
  return Dataset(std::move(v));
}

Dataset separated_line() {
  std::vector<LabeledInstance> v;
  for (int i = 1; i <= 10; ++i) {
    v.push_back({{static_cast<double>(i) / 2.0}, Label::Positive, "p" + std::to_string(i)});
    v.push_back({{-static_cast<double>(i) / 2.0}, Label::Negative, "n" + std::to_string(i)});
  }
  return Dataset(std::move(v));
}

}  // namespace

TEST_CASE("random forest defaults: 300 trees, depth at most 20") {
  const Dataset ds = generate_synthetic({200, 4, 0.5, 1.0, 1});
  ForestParams params;
  params.seed = 5;
  const PointModel model = train_random_forest(ds, params);
  REQUIRE(model.forest() != nullptr);
  CHECK(model.forest()->trees.size() == 300);
  std::size_t deepest = 0;
  for (const auto& t : model.forest()->trees) deepest = std::max(deepest, t.depth());
  CHECK(deepest <= 20);
  CHECK(deepest > 3);
  CHECK(model.name() == "random_forest(trees=300,depth=20,min_leaf=1,mtry=2,seed=5)");
}

TEST_CASE("random forest is deterministic per seed and varies across seeds") {
  const Dataset ds = generate_synthetic({200, 3, 0.5, 1.0, 2});
  ForestParams params;
  params.n_trees = 40;
  params.seed = 1;
  const PointModel a = train_random_forest(ds, params);
  const PointModel b = train_random_forest(ds, params);
  params.seed = 2;
  const PointModel c = train_random_forest(ds, params);
  double max_diff = 0.0;
  for (const auto& inst : ds.instances()) {
    CHECK(a.predict_proba(inst.features) == b.predict_proba(inst.features));
    max_diff = std::max(max_diff, std::fabs(a.predict_proba(inst.features) - c.predict_proba(inst.features)));
  }
  CHECK(max_diff > 0.0);
}

TEST_CASE("random forest respects max_depth and min_leaf") {
  const Dataset ds = generate_synthetic({300, 3, 0.5, 0.5, 4});
  ForestParams params;
  params.n_trees = 10;
  params.max_depth = 3;
  params.min_leaf = 7;
  const PointModel model = train_random_forest(ds, params);
  for (const auto& t : model.forest()->trees) {
    CHECK(t.depth() <= 3);
    for (const auto& n : t.nodes()) {
      if (n.is_leaf()) CHECK(n.sample_count >= 7);
    }
  }
}

TEST_CASE("random forest probabilities stay in [0,1] and separate clean data") {
  const Dataset ds = separated_line();
  ForestParams params;
  params.n_trees = 25;
  params.seed = 3;
  const PointModel model = train_random_forest(ds, params);
  for (double x = -6.0; x <= 6.0; x += 0.25) {
    const double p = model.predict_proba(std::vector<double>{x});
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK(model.predict_proba(std::vector<double>{10.0}) == 1.0);
  CHECK(model.predict_proba(std::vector<double>{-10.0}) == 0.0);
}

TEST_CASE("hand-built forests") {
  // Root splits feature 0 at 0.5; the left leaf saw 3 positive and 1 negative.
  std::vector<TreeNode> nodes(3);
  nodes[0].feature = 0;
  nodes[0].threshold = 0.5;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].positive_fraction = 0.75;
  nodes[1].positive_count = 3;
  nodes[1].sample_count = 4;
  nodes[2].positive_fraction = 0.0;
  ForestParams params;
  params.n_trees = 1;
  const PointModel one(ForestFit{{DecisionTree(nodes)}, params}, 1, 3, 1);
  CHECK(one.predict_proba(std::vector<double>{0.2}) == 0.75);
  CHECK(one.predict_proba(std::vector<double>{0.5}) == 0.75);
  CHECK(one.predict_proba(std::vector<double>{0.7}) == 0.0);
  CHECK(one.predict_label(std::vector<double>{0.2}) == Label::Positive);

  TreeNode pure;
  pure.positive_fraction = 1.0;
  params.n_trees = 3;
  const PointModel all_pos(ForestFit{{DecisionTree({pure}), DecisionTree({pure}), DecisionTree({pure})}, params}, 2, 1, 0);
  CHECK(all_pos.predict_proba(std::vector<double>{4.0, -1.0}) == 1.0);

  CHECK(error_code_of([&] { one.predict_proba(std::vector<double>{1.0, 2.0}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("predict_label tie rule") {
  const PointModel zero(LogisticFit{{0.0, 0.0}, 0.0, {}}, 2, 1, 1);
  CHECK(zero.predict_proba(std::vector<double>{3.0, -7.0}) == 0.5);
  CHECK(zero.predict_label(std::vector<double>{3.0, -7.0}) == Label::Negative);
  CHECK(zero.predict_label(std::vector<double>{3.0, -7.0}, 0.4) == Label::Positive);
  CHECK(error_code_of([&] { zero.predict_label(std::vector<double>{0.0, 0.0}, 1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("training on a single class is rejected") {
  CHECK(error_code_of([] { train_random_forest(one_class(5), {}); }) == ErrorCode::SingleClassTraining);
  CHECK(error_code_of([] { train_logistic(one_class(5), {}); }) == ErrorCode::SingleClassTraining);
}

TEST_CASE("logistic training is bit-identical across runs") {
  const Dataset ds = generate_synthetic({150, 4, 0.4, 1.0, 7});
  const PointModel a = train_logistic(ds, {});
  const PointModel b = train_logistic(ds, {});
  CHECK(a.logistic()->weights == b.logistic()->weights);
  CHECK(a.logistic()->bias == b.logistic()->bias);
  for (const auto& inst : ds.instances()) CHECK(a.predict_proba(inst.features) == b.predict_proba(inst.features));
}

TEST_CASE("logistic with one iteration takes one gradient step from zero") {
  const Dataset ds = generate_synthetic({30, 3, 0.3, 2.0, 1});
  LogisticParams params;
  params.iterations = 1;
  params.learning_rate = 0.25;
  const PointModel m = train_logistic(ds, params);

  // At w = 0 every sigmoid is 0.5, so the gradient is mean((0.5 - y) x).
  std::vector<double> expected(3, 0.0);
  double expected_bias = 0.0;
  for (const auto& inst : ds.instances()) {
    const double r = 0.5 - (inst.label == Label::Positive ? 1.0 : 0.0);
    for (std::size_t j = 0; j < 3; ++j) expected[j] += r * inst.features[j];
    expected_bias += r;
  }
  for (std::size_t j = 0; j < 3; ++j) CHECK(m.logistic()->weights[j] == doctest::Approx(-0.25 * expected[j] / 30.0).epsilon(1e-12));
  CHECK(m.logistic()->bias == doctest::Approx(-0.25 * expected_bias / 30.0).epsilon(1e-12));

  params.iterations = 0;
  CHECK(error_code_of([&] { train_logistic(ds, params); }) == ErrorCode::ConfigError);
}

TEST_CASE("logistic separates a line with a gap") {
  const Dataset ds = separated_line();
  const PointModel m = train_logistic(ds, {});
  std::vector<Label> predicted;
  for (const auto& inst : ds.instances()) predicted.push_back(m.predict_label(inst.features));
  const MetricTriple t = point_metrics(ds.labels(), predicted);
  CHECK(t.ccr() == 1.0);
}

TEST_CASE("logistic diverges loudly") {
  std::vector<LabeledInstance> v;
  v.push_back({{1e200}, Label::Positive, "a"});
  v.push_back({{-1e200}, Label::Negative, "b"});
  LogisticParams params;
  params.learning_rate = 1e10;
  params.iterations = 5;
  CHECK(error_code_of([&] { train_logistic(Dataset(v), params); }) == ErrorCode::NonFiniteLoss);
}

TEST_CASE("logistic gradient matches central finite differences") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset ds = generate_synthetic({12, 3, 0.5, 1.0, static_cast<std::uint64_t>(trial)});
    std::vector<double> w(3);
    for (auto& x : w) x = rng.normal();
    const double b = rng.normal();
    const double l2 = 0.05 * rng.uniform();
    const LogisticObjective obj = logistic_objective(ds, w, b, l2);

    const double h = 1e-6;
    auto rel_ok = [](double analytic, double numeric) {
      return std::fabs(analytic - numeric) <= 1e-5 * std::max(1.0, std::fabs(numeric));
    };
    for (std::size_t j = 0; j < 3; ++j) {
      auto up = w, down = w;
      up[j] += h;
      down[j] -= h;
      const double numeric = (logistic_objective(ds, up, b, l2).loss - logistic_objective(ds, down, b, l2).loss) / (2 * h);
      CHECK(rel_ok(obj.grad_weights[j], numeric));
    }
    const double numeric_b = (logistic_objective(ds, w, b + h, l2).loss - logistic_objective(ds, w, b - h, l2).loss) / (2 * h);
    CHECK(rel_ok(obj.grad_bias, numeric_b));
  }
}

TEST_CASE("two forest seeds can disagree on a label near 0.5") {
  const Dataset ds = generate_synthetic({200, 3, 0.5, 0.5, 11});
  ForestParams params;
  params.n_trees = 25;
  params.seed = 1;
  const PointModel a = train_random_forest(ds, params);
  params.seed = 2;
  const PointModel b = train_random_forest(ds, params);
  const Dataset probe = generate_synthetic({200, 3, 0.5, 0.5, 12});
  std::size_t disagreements = 0;
  for (const auto& inst : probe.instances()) {
    if (a.predict_label(inst.features) != b.predict_label(inst.features)) {
      ++disagreements;
      CHECK(std::fabs(a.predict_proba(inst.features) - 0.5) < 0.5);
    }
  }
  CHECK(disagreements > 0);
}

TEST_CASE("model_to_json dumps trees and weights") {
  const Dataset ds = separated_line();
  ForestParams params;
  params.n_trees = 2;
  const std::string forest = model_to_json(train_random_forest(ds, params));
  CHECK(forest.find("\"trees\"") != std::string::npos);
  CHECK(forest.find("\"threshold\"") != std::string::npos);
  const std::string lr = model_to_json(train_logistic(ds, {}));
  CHECK(lr.find("\"weights\"") != std::string::npos);
}
