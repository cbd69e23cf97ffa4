#include "mcpeval/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mcpeval/error.hpp"
#include "mcpeval/random.hpp"
#include "text_util.hpp"

namespace mcpeval {

const char* to_string(ModelKind kind) {
  return kind == ModelKind::RandomForest ? "random_forest" : "logistic";
}

std::size_t ForestParams::resolved_features_per_split(std::size_t dim) const {
  if (features_per_split) return *features_per_split;
  auto root = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dim))));
  return std::max<std::size_t>(root, 1);
}

void ForestParams::validate(std::size_t dim) const {
  if (n_trees < 1) throw Error(ErrorCode::ConfigError, "model.trees must be at least 1");
  if (max_depth < 1) throw Error(ErrorCode::ConfigError, "model.depth must be at least 1");
  if (min_leaf < 1) throw Error(ErrorCode::ConfigError, "model.min_leaf must be at least 1");
  const std::size_t mtry = resolved_features_per_split(dim);
  if (mtry < 1 || mtry > dim) {
    throw Error(ErrorCode::ConfigError, "model.features_per_split must lie in [1, dim]");
  }
}

void LogisticParams::validate() const {
  if (iterations < 1) throw Error(ErrorCode::ConfigError, "model.iterations must be at least 1");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw Error(ErrorCode::ConfigError, "model.l2 must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::ConfigError, "model.learning_rate must be > 0");
  }
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error(ErrorCode::InvalidArgument, "tree has no nodes");
  for (const auto& node : nodes_) {
    if (!node.is_leaf() && (node.left >= nodes_.size() || node.right >= nodes_.size())) {
      throw Error(ErrorCode::InvalidArgument, "tree node points outside the node table");
    }
  }
}

double DecisionTree::predict(std::span<const double> x) const {
  std::uint32_t at = 0;
  while (!nodes_[at].is_leaf()) {
    const TreeNode& node = nodes_[at];
    at = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[at].positive_fraction;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children are always appended after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) {
      level[nodes_[i].left] = level[i] + 1;
      level[nodes_[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

PointModel::PointModel(ForestFit fit, std::size_t dim, std::size_t positives, std::size_t negatives)
    : fit_(std::move(fit)), dim_(dim), positives_(positives), negatives_(negatives) {}

PointModel::PointModel(LogisticFit fit, std::size_t dim, std::size_t positives, std::size_t negatives)
    : fit_(std::move(fit)), dim_(dim), positives_(positives), negatives_(negatives) {
  if (std::get<LogisticFit>(fit_).weights.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "logistic weight vector does not match dim");
  }
}

ModelKind PointModel::kind() const noexcept {
  return std::holds_alternative<ForestFit>(fit_) ? ModelKind::RandomForest : ModelKind::Logistic;
}

double PointModel::predict_proba(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(dim_) +
                                                  " features, got " + std::to_string(x.size()));
  }
  if (const auto* f = forest()) {
    double sum = 0.0;
    for (const auto& tree : f->trees) sum += tree.predict(x);
    return sum / static_cast<double>(f->trees.size());
  }
  const auto& lr = std::get<LogisticFit>(fit_);
  double z = lr.bias;
  for (std::size_t j = 0; j < dim_; ++j) z += lr.weights[j] * x[j];
  return sigmoid(z);
}

Label PointModel::predict_label(std::span<const double> x, double threshold) const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie strictly inside (0,1)");
  }
  return predict_proba(x) > threshold ? Label::Positive : Label::Negative;
}

std::string PointModel::name() const {
  if (const auto* f = forest()) {
    const auto& p = f->params;
    return "random_forest(trees=" + std::to_string(p.n_trees) + ",depth=" + std::to_string(p.max_depth) +
           ",min_leaf=" + std::to_string(p.min_leaf) +
           ",mtry=" + std::to_string(p.resolved_features_per_split(dim_)) + ",seed=" + std::to_string(p.seed) +
           ")";
  }
  const auto& p = std::get<LogisticFit>(fit_).params;
  return "logistic(l2=" + detail::format_double(p.l2) + ",learning_rate=" + detail::format_double(p.learning_rate) +
         ",iterations=" + std::to_string(p.iterations) + ")";
}

namespace {

void require_both_classes(const Dataset& ds) {
  if (!ds.has_both_classes()) {
    throw Error(ErrorCode::SingleClassTraining, "training data contains a single class");
  }
}

struct SplitChoice {
  bool found = false;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  double score = -1.0;
};

// Builds one CART tree over a bootstrap sample. `rows` holds dataset
// positions (with repeats); nodes own contiguous ranges of it.
class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, const ForestParams& params, Rng& rng)
      : ds_(ds), params_(params), rng_(rng), mtry_(params.resolved_features_per_split(ds.dim())) {
    features_.resize(ds.dim());
    std::iota(features_.begin(), features_.end(), 0u);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    grow(0, rows_.size(), 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  std::uint32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    const std::size_t count = end - begin;
    std::size_t positives = 0;
    for (std::size_t i = begin; i < end; ++i) positives += ds_[rows_[i]].label == Label::Positive;
    nodes_[index].sample_count = static_cast<std::uint32_t>(count);
    nodes_[index].positive_count = static_cast<std::uint32_t>(positives);
    nodes_[index].positive_fraction = static_cast<double>(positives) / static_cast<double>(count);

    const bool pure = positives == 0 || positives == count;
    if (pure || depth >= params_.max_depth || count < 2 * params_.min_leaf) return index;

    const SplitChoice split = best_split(begin, end, positives);
    if (!split.found) return index;

    auto middle = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                        rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                        [&](std::size_t r) { return ds_[r].features[split.feature] <= split.threshold; });
    const auto mid = static_cast<std::size_t>(middle - rows_.begin());

    const std::uint32_t left = grow(begin, mid, depth + 1);
    const std::uint32_t right = grow(mid, end, depth + 1);
    TreeNode& node = nodes_[index];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  // Visits features in a fresh random order and stops once `mtry` features
  // that are non-constant within the node have been evaluated.
  SplitChoice best_split(std::size_t begin, std::size_t end, std::size_t positives) {
    SplitChoice best;
    const std::size_t count = end - begin;
    std::size_t evaluated = 0;
    for (std::size_t k = 0; k < features_.size() && evaluated < mtry_; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng_.below(features_.size() - k));
      std::swap(features_[k], features_[pick]);
      const std::uint32_t f = features_[k];

      column_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& inst = ds_[rows_[i]];
        column_.emplace_back(inst.features[f], inst.label == Label::Positive);
      }
      std::sort(column_.begin(), column_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (column_.front().first == column_.back().first) continue;
      ++evaluated;

      // Maximising sum over children of (p^2 + q^2) / n_child is equivalent
      // to minimising the size-weighted Gini impurity.
      std::size_t left_pos = 0;
      for (std::size_t i = 0; i + 1 < count; ++i) {
        left_pos += column_[i].second;
        if (column_[i].first == column_[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = count - nl;
        if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
        const double lp = static_cast<double>(left_pos);
        const double ln = static_cast<double>(nl - left_pos);
        const double rp = static_cast<double>(positives - left_pos);
        const double rn = static_cast<double>(nr - (positives - left_pos));
        const double score = (lp * lp + ln * ln) / static_cast<double>(nl) + (rp * rp + rn * rn) / static_cast<double>(nr);
        if (!best.found || score > best.score) {
          best.found = true;
          best.score = score;
          best.feature = f;
          best.threshold = midpoint(column_[i].first, column_[i + 1].first);
        }
      }
    }
    return best;
  }

  static double midpoint(double lo, double hi) {
    double mid = lo + (hi - lo) / 2.0;
    // Keep lo on the left and hi on the right even when rounding collapses.
    if (!(mid < hi)) mid = lo;
    return mid;
  }

  const Dataset& ds_;
  const ForestParams& params_;
  Rng& rng_;
  std::size_t mtry_;
  std::vector<std::uint32_t> features_;
  std::vector<std::size_t> rows_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, bool>> column_;
};

}  // namespace

DecisionTree train_tree(const Dataset& ds, const ForestParams& params, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  std::vector<std::size_t> rows(ds.size());
  for (auto& r : rows) r = static_cast<std::size_t>(rng.below(ds.size()));
  TreeBuilder builder(ds, params, rng);
  return builder.build(std::move(rows));
}

PointModel train_random_forest(const Dataset& ds, const ForestParams& params) {
  params.validate(ds.dim());
  require_both_classes(ds);
  ForestFit fit;
  fit.params = params;
  fit.trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    fit.trees.push_back(train_tree(ds, params, derive_seed(params.seed, "tree", t)));
  }
  return PointModel(std::move(fit), ds.dim(), ds.count(Label::Positive), ds.count(Label::Negative));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

LogisticObjective logistic_objective(const Dataset& ds, std::span<const double> weights, double bias, double l2) {
  if (weights.size() != ds.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "weight vector does not match dataset dim");
  }
  LogisticObjective out;
  out.grad_weights.assign(ds.dim(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(ds.size());
  for (const auto& inst : ds.instances()) {
    double z = bias;
    for (std::size_t j = 0; j < ds.dim(); ++j) z += weights[j] * inst.features[j];
    const double y = inst.label == Label::Positive ? 1.0 : 0.0;
    out.loss += softplus(z) - y * z;
    const double residual = sigmoid(z) - y;
    for (std::size_t j = 0; j < ds.dim(); ++j) out.grad_weights[j] += residual * inst.features[j];
    out.grad_bias += residual;
  }
  out.loss *= inv_n;
  out.grad_bias *= inv_n;
  double penalty = 0.0;
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    out.grad_weights[j] = out.grad_weights[j] * inv_n + l2 * weights[j];
    penalty += weights[j] * weights[j];
  }
  out.loss += 0.5 * l2 * penalty;
  return out;
}

PointModel train_logistic(const Dataset& ds, const LogisticParams& params) {
  params.validate();
  require_both_classes(ds);
  LogisticFit fit;
  fit.params = params;
  fit.weights.assign(ds.dim(), 0.0);
  for (std::size_t it = 0; it < params.iterations; ++it) {
    const LogisticObjective obj = logistic_objective(ds, fit.weights, fit.bias, params.l2);
    if (!std::isfinite(obj.loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "logistic loss diverged at iteration " + std::to_string(it));
    }
    for (std::size_t j = 0; j < ds.dim(); ++j) fit.weights[j] -= params.learning_rate * obj.grad_weights[j];
    fit.bias -= params.learning_rate * obj.grad_bias;
  }
  const LogisticObjective final_obj = logistic_objective(ds, fit.weights, fit.bias, params.l2);
  if (!std::isfinite(final_obj.loss)) {
    throw Error(ErrorCode::NonFiniteLoss, "logistic loss is not finite after training");
  }
  return PointModel(std::move(fit), ds.dim(), ds.count(Label::Positive), ds.count(Label::Negative));
}

std::string model_to_json(const PointModel& model) {
  nlohmann::ordered_json doc;
  doc["kind"] = to_string(model.kind());
  doc["name"] = model.name();
  doc["dim"] = model.dim();
  doc["trained_positives"] = model.trained_positives();
  doc["trained_negatives"] = model.trained_negatives();
  if (const auto* f = model.forest()) {
    auto& trees = doc["trees"] = nlohmann::ordered_json::array();
    for (const auto& tree : f->trees) {
      // Nested form, built bottom-up since children follow parents.
      std::vector<nlohmann::ordered_json> built(tree.nodes().size());
      for (std::size_t i = tree.nodes().size(); i-- > 0;) {
        const TreeNode& n = tree.nodes()[i];
        nlohmann::ordered_json node;
        if (n.is_leaf()) {
          node["positive_fraction"] = n.positive_fraction;
          node["samples"] = n.sample_count;
        } else {
          node["feature"] = n.feature;
          node["threshold"] = n.threshold;
          node["left"] = std::move(built[n.left]);
          node["right"] = std::move(built[n.right]);
        }
        built[i] = std::move(node);
      }
      trees.push_back(std::move(built[0]));
    }
  } else {
    const auto& lr = *model.logistic();
    doc["weights"] = lr.weights;
    doc["bias"] = lr.bias;
  }
  return doc.dump(2);
}

}  // namespace mcpeval
