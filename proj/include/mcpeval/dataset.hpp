#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mcpeval {

// Positive is "active", Negative is "inactive".
enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

const char* to_string(Label label);

struct LabeledInstance {
  std::vector<double> features;
  Label label = Label::Negative;
  std::string id;
};

// Immutable collection of instances sharing one dimensionality.
// Construction validates: nonempty, uniform dim, unique ids, finite features.
class Dataset {
 public:
  explicit Dataset(std::vector<LabeledInstance> instances);

  std::size_t size() const noexcept { return instances_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const LabeledInstance& operator[](std::size_t i) const { return instances_[i]; }
  std::span<const LabeledInstance> instances() const noexcept { return instances_; }

  std::size_t count(Label label) const;
  std::vector<Label> labels() const;
  bool has_both_classes() const { return count(Label::Positive) > 0 && count(Label::Negative) > 0; }

  // Majority label; ties resolve to Negative.
  Label dominant_label() const;

  // Instances at the given positions, in the order given.
  Dataset subset(std::span<const std::size_t> positions) const;

 private:
  std::vector<LabeledInstance> instances_;
  std::size_t dim_ = 0;
};

struct SplitSpec {
  double test_fraction = 0.2;
  double calibration_fraction = 0.3;
  bool stratified = true;
  std::size_t repeats = 100;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct SyntheticSpec {
  std::size_t n = 0;
  std::size_t dim = 0;
  double class_balance = 0.5;
  double separation = 1.0;
  std::uint64_t seed = 0;
};

// Reads the dataset CSV format: header row, one label column (1/0 or
// active/inactive, case-insensitive), optional `id` column, every other
// column a finite real feature.
Dataset load_dataset(const std::filesystem::path& path, std::string_view label_column = "label");
Dataset parse_dataset(std::string_view csv_text, std::string_view label_column = "label");

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string format_dataset(const Dataset& ds);

// Isotropic two-Gaussian mixture. Class means sit at +/- separation/2 on the
// first axis with unit variance per coordinate. Exactly round(n * balance)
// instances are Positive; instance order is shuffled and ids are "0".."n-1".
Dataset generate_synthetic(const SyntheticSpec& spec);

struct Partition {
  Dataset first;
  Dataset second;
};

// Seeded partition; `fraction` of the instances go to `second`. Stratified
// mode allocates round(k * n_c / n) held-out slots per class, clamped so that
// each side keeps at least one instance of every class.
Partition partition_dataset(const Dataset& ds, double fraction, bool stratified, std::uint64_t seed);

// Returns (train, test). Seed = derive_seed(master_seed, {("split", repeat_index)}).
Partition split_train_test(const Dataset& ds, const SplitSpec& spec, std::size_t repeat_index);

// Returns (proper, calibration).
// Seed = derive_seed(master_seed, {("calibration", resample_index)}).
Partition split_proper_calibration(const Dataset& train, const SplitSpec& spec,
                                   std::size_t resample_index = 0);

}  // namespace mcpeval
