#include <doctest.h>

#include <algorithm>

#include "mcpeval/conformal.hpp"
#include "mcpeval/error.hpp"
#include "mcpeval/random.hpp"
#include "test_support.hpp"

using namespace mcpeval;
using mcpeval::testing::error_code_of;

namespace {

// Quadratic-scan rank count, independent of the sorted-table lookup.
double brute_p(const std::vector<double>& scores, double alpha) {
  std::size_t at_least = 0;
  for (double s : scores) {
    if (!(s < alpha)) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(scores.size() + 1);
}

bool subset_of(PredictionSet a, PredictionSet b) {
  for (Label l : {Label::Positive, Label::Negative}) {
    if (contains(a, l) && !contains(b, l)) return false;
  }
  return true;
}

PointModel constant_model(double proba) {
  // Logistic with zero weights and bias logit(proba).
  return PointModel(LogisticFit{{0.0}, std::log(proba / (1.0 - proba)), {}}, 1, 1, 1);
}

}  // namespace

TEST_CASE("nonconformity") {
  CHECK(nonconformity(1.0, Label::Positive) == 0.0);
  CHECK(nonconformity(1.0, Label::Negative) == 1.0);
  CHECK(nonconformity(0.3, Label::Positive) == doctest::Approx(0.7));
  CHECK(nonconformity(0.3, Label::Negative) == doctest::Approx(0.3));
}

TEST_CASE("build_calibration sorts scores per class") {
  std::vector<LabeledInstance> v;
  v.push_back({{0.0}, Label::Positive, "a"});
  v.push_back({{1.0}, Label::Positive, "b"});
  v.push_back({{2.0}, Label::Negative, "c"});
  // Logistic with weight -ln(1.5)/... is awkward; use a hand forest keyed on x instead.
  std::vector<TreeNode> nodes(5);
  nodes[0] = {0, 0.5, 1, 2, 0, 0, 0};
  nodes[1].positive_fraction = 0.6;
  nodes[2] = {0, 1.5, 3, 4, 0, 0, 0};
  nodes[3].positive_fraction = 0.9;
  nodes[4].positive_fraction = 0.2;
  ForestParams params;
  params.n_trees = 1;
  const PointModel model(ForestFit{{DecisionTree(nodes)}, params}, 1, 2, 1);
  const CalibrationTable t = build_calibration(model, Dataset(v));
  REQUIRE(t.pos_scores().size() == 2);
  CHECK(t.pos_scores()[0] == doctest::Approx(0.1));
  CHECK(t.pos_scores()[1] == doctest::Approx(0.4));
  CHECK(t.neg_scores() == std::vector<double>{0.2});

  std::vector<LabeledInstance> only_pos{{{0.0}, Label::Positive, "a"}, {{1.0}, Label::Positive, "b"}};
  CHECK(error_code_of([&] { build_calibration(model, Dataset(only_pos)); }) == ErrorCode::EmptyClassCalibration);
}

TEST_CASE("CalibrationTable validates its invariants") {
  CHECK(error_code_of([] { CalibrationTable({}, {0.1}); }) == ErrorCode::EmptyClassCalibration);
  CHECK(error_code_of([] { CalibrationTable({0.3, 0.1}, {0.1}); }) == ErrorCode::InvalidArgument);
  CHECK(error_code_of([] { CalibrationTable({0.1, 1.5}, {0.1}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("p_values worked examples") {
  const CalibrationTable t({0.1, 0.2, 0.3}, {0.5});
  // alpha_pos = 1 - 0.75 = 0.25: one score is >= 0.25.
  CHECK(p_values(t, 0.75).p_pos == 0.5);
  // alpha_pos = 0.95 exceeds every score.
  CHECK(p_values(t, 0.05).p_pos == 0.25);
  // alpha_pos = 0 is below every score.
  CHECK(p_values(t, 1.0).p_pos == 1.0);
  // Ties count toward the numerator: alpha_neg = 0.5 equals the only score.
  CHECK(p_values(t, 0.5).p_neg == 1.0);
  CHECK(p_values(t, 0.6).p_neg == 0.5);
}

TEST_CASE("p_values agree with brute-force counting on small tables") {
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  Rng rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> pos(1 + rng.below(4)), neg(1 + rng.below(4));
    for (auto& s : pos) s = grid[rng.below(5)];
    for (auto& s : neg) s = grid[rng.below(5)];
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    const CalibrationTable t(pos, neg);
    for (double proba : grid) {
      const PValuePair p = p_values(t, proba);
      CHECK(p.p_pos == brute_p(pos, 1.0 - proba));
      CHECK(p.p_neg == brute_p(neg, proba));
      CHECK(p.p_pos >= 1.0 / static_cast<double>(pos.size() + 1));
      CHECK(p.p_neg <= 1.0);
    }
  }
}

TEST_CASE("prediction_set maps p-values to the four outcomes") {
  const Epsilon e(0.1);
  CHECK(prediction_set({0.5, 0.05}, e) == PredictionSet::PositiveOnly);
  CHECK(prediction_set({0.05, 0.5}, e) == PredictionSet::NegativeOnly);
  CHECK(prediction_set({0.5, 0.5}, e) == PredictionSet::Both);
  CHECK(prediction_set({0.05, 0.05}, e) == PredictionSet::Empty);
  // Strict inclusion: p equal to the significance is excluded.
  CHECK(prediction_set({0.1, 0.5}, e) == PredictionSet::NegativeOnly);
}

TEST_CASE("Epsilon validation and default grid") {
  CHECK(error_code_of([] { Epsilon(0.0); }) == ErrorCode::InvalidArgument);
  CHECK(error_code_of([] { Epsilon(1.5); }) == ErrorCode::InvalidArgument);
  const auto grid = default_epsilon_grid();
  REQUIRE(grid.size() == 3);
  CHECK(grid[0].confidence() == doctest::Approx(0.7));
  CHECK(grid[2].confidence() == doctest::Approx(0.9));
}

TEST_CASE("property: prediction sets are nested in the significance level") {
  Rng rng(21);
  for (int i = 0; i < 10000; ++i) {
    const PValuePair p{rng.uniform() + 1e-9, rng.uniform() + 1e-9};
    double e1 = 0.001 + 0.998 * rng.uniform();
    double e2 = 0.001 + 0.998 * rng.uniform();
    if (e1 < e2) std::swap(e1, e2);
    CHECK(subset_of(prediction_set(p, Epsilon(e1)), prediction_set(p, Epsilon(e2))));
  }
}

TEST_CASE("single-score calibration tables yield p-values in {1/2, 1}") {
  const CalibrationTable t({0.4}, {0.3});
  for (double proba = 0.0; proba <= 1.0; proba += 0.05) {
    const PValuePair p = p_values(t, proba);
    CHECK((p.p_pos == 0.5 || p.p_pos == 1.0));
    CHECK((p.p_neg == 0.5 || p.p_neg == 1.0));
  }
  (void)constant_model;
}

TEST_CASE("prediction dump round trip and parse errors") {
  PredictionDump dump;
  dump.epsilons = {Epsilon(0.3), Epsilon(0.1)};
  PredictionRecord r;
  r.repeat = 2;
  r.id = "c1";
  r.truth = Label::Positive;
  r.proba_pos = 0.1 + 0.2;
  r.p = {1.0 / 3.0, 0.25};
  r.sets = {PredictionSet::PositiveOnly, PredictionSet::Both};
  r.train_dominant = Label::Negative;
  dump.records.push_back(r);
  const std::string text = format_prediction_dump(dump);
  CHECK(text.rfind("repeat,id,true_label,proba_pos,p_pos,p_neg,train_dominant,set_0.3,set_0.1\n", 0) == 0);

  const PredictionDump back = parse_prediction_dump(text);
  REQUIRE(back.records.size() == 1);
  CHECK(back.epsilons == dump.epsilons);
  CHECK(back.records[0].proba_pos == r.proba_pos);
  CHECK(back.records[0].p.p_pos == r.p.p_pos);
  CHECK(back.records[0].sets == r.sets);
  CHECK(back.records[0].repeat == std::optional<std::size_t>(2));
  CHECK(back.records[0].train_dominant == std::optional<Label>(Label::Negative));

  CHECK(error_code_of([] { parse_prediction_dump("id,set_0.1\na,both\n"); }) == ErrorCode::MalformedCsv);
  CHECK(error_code_of([] { parse_prediction_dump("id,true_label\na,1\n"); }) == ErrorCode::MalformedCsv);
  try {
    parse_prediction_dump("true_label,set_0.1\n1,both\n0,maybe\n");
    FAIL("expected MalformedCsv");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}
