#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mcpeval/dataset.hpp"

namespace mcpeval {

struct ForestParams {
  std::size_t n_trees = 300;
  std::size_t max_depth = 20;
  std::size_t min_leaf = 1;
  // Unset means floor(sqrt(dim)), at least 1.
  std::optional<std::size_t> features_per_split;
  std::uint64_t seed = 0;

  std::size_t resolved_features_per_split(std::size_t dim) const;
  void validate(std::size_t dim) const;
};

struct LogisticParams {
  double l2 = 1e-3;
  double learning_rate = 0.1;
  std::size_t iterations = 500;

  void validate() const;
};

// Flat binary tree. Internal nodes route x[feature] <= threshold to `left`;
// leaves carry the Positive proportion of the bootstrap sample reaching them.
struct TreeNode {
  static constexpr std::uint32_t kLeaf = 0xffffffffu;

  std::uint32_t feature = kLeaf;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double positive_fraction = 0.0;
  std::uint32_t positive_count = 0;
  std::uint32_t sample_count = 0;

  bool is_leaf() const noexcept { return feature == kLeaf; }
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestFit {
  std::vector<DecisionTree> trees;
  ForestParams params;
};

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  LogisticParams params;
};

enum class ModelKind { RandomForest, Logistic };

const char* to_string(ModelKind kind);

class PointModel {
 public:
  PointModel(ForestFit fit, std::size_t dim, std::size_t positives, std::size_t negatives);
  PointModel(LogisticFit fit, std::size_t dim, std::size_t positives, std::size_t negatives);

  ModelKind kind() const noexcept;
  std::size_t dim() const noexcept { return dim_; }
  std::size_t trained_positives() const noexcept { return positives_; }
  std::size_t trained_negatives() const noexcept { return negatives_; }

  // Probability of the Positive class. Random forest: mean over trees of the
  // leaf Positive proportion. Logistic: sigmoid of the linear score.
  double predict_proba(std::span<const double> x) const;

  // Positive iff predict_proba(x) > threshold; an exact tie is Negative.
  Label predict_label(std::span<const double> x, double threshold = 0.5) const;

  // Concrete, parameterised model name, e.g.
  // "random_forest(trees=300,depth=20,min_leaf=1,mtry=2,seed=42)".
  std::string name() const;

  const ForestFit* forest() const noexcept { return std::get_if<ForestFit>(&fit_); }
  const LogisticFit* logistic() const noexcept { return std::get_if<LogisticFit>(&fit_); }

 private:
  std::variant<ForestFit, LogisticFit> fit_;
  std::size_t dim_;
  std::size_t positives_;
  std::size_t negatives_;
};

PointModel train_random_forest(const Dataset& ds, const ForestParams& params);

DecisionTree train_tree(const Dataset& ds, const ForestParams& params, std::uint64_t tree_seed);

PointModel train_logistic(const Dataset& ds, const LogisticParams& params);

// Mean L2-regularised log-loss (bias unpenalised) and its gradient.
struct LogisticObjective {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

LogisticObjective logistic_objective(const Dataset& ds, std::span<const double> weights, double bias,
                                     double l2);

double sigmoid(double z);

// Debugging dump; not a stable format.
std::string model_to_json(const PointModel& model);

}  // namespace mcpeval
