#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcpeval/classifier.hpp"
#include "mcpeval/dataset.hpp"

namespace mcpeval {

enum class PredictionSet { PositiveOnly, NegativeOnly, Both, Empty };

// "positive" | "negative" | "both" | "empty"
const char* to_string(PredictionSet set);
std::optional<PredictionSet> parse_prediction_set(std::string_view text);

bool contains(PredictionSet set, Label label);

// A significance level strictly inside (0,1); confidence = 1 - significance.
class Epsilon {
 public:
  explicit Epsilon(double significance);

  double significance() const noexcept { return significance_; }
  double confidence() const noexcept { return 1.0 - significance_; }

  friend bool operator==(Epsilon, Epsilon) = default;

 private:
  double significance_;
};

// Report grid: 70%, 80% and 90% confidence.
std::vector<Epsilon> default_epsilon_grid();

// Inverse-probability nonconformity: 1 - P(label).
double nonconformity(double proba_pos, Label label);

// Per-class (Mondrian) calibration scores, each list sorted ascending.
class CalibrationTable {
 public:
  CalibrationTable(std::vector<double> pos_scores, std::vector<double> neg_scores);

  const std::vector<double>& scores(Label label) const noexcept {
    return label == Label::Positive ? pos_ : neg_;
  }
  const std::vector<double>& pos_scores() const noexcept { return pos_; }
  const std::vector<double>& neg_scores() const noexcept { return neg_; }
  std::size_t size() const noexcept { return pos_.size() + neg_.size(); }

 private:
  std::vector<double> pos_;
  std::vector<double> neg_;
};

CalibrationTable build_calibration(const PointModel& model, const Dataset& calibration);

struct PValuePair {
  double p_pos = 1.0;
  double p_neg = 1.0;
};

// p_c = (#{a in table_c : a >= alpha_c} + 1) / (n_c + 1), plain comparisons.
PValuePair p_values(const CalibrationTable& table, double proba_pos);

// Class c enters the set iff p_c > significance.
PredictionSet prediction_set(const PValuePair& p, Epsilon eps);

// One row of the predictions dump.
struct PredictionRecord {
  std::optional<std::size_t> repeat;
  std::string id;
  Label truth = Label::Negative;
  double proba_pos = 0.0;
  PValuePair p;
  std::vector<PredictionSet> sets;  // parallel to the epsilon grid
  // Majority label of the training set the prediction came from.
  std::optional<Label> train_dominant;
};

struct PredictionDump {
  std::vector<Epsilon> epsilons;
  std::vector<PredictionRecord> records;
};

// CSV: [repeat,]id,true_label,proba_pos,p_pos,p_neg[,train_dominant],set_<eps>...
// The bracketed columns are optional and written only when present.
std::string format_prediction_dump(const PredictionDump& dump);
PredictionDump parse_prediction_dump(std::string_view csv_text);

}  // namespace mcpeval
