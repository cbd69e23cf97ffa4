#include "mcpeval/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mcpeval/error.hpp"
#include "mcpeval/random.hpp"
#include "text_util.hpp"

namespace mcpeval {

const char* to_string(Label label) {
  return label == Label::Positive ? "active" : "inactive";
}

Dataset::Dataset(std::vector<LabeledInstance> instances) : instances_(std::move(instances)) {
  if (instances_.empty()) {
    throw Error(ErrorCode::EmptyDataset, "dataset has no instances");
  }
  dim_ = instances_.front().features.size();
  if (dim_ == 0) {
    throw Error(ErrorCode::InvalidDataset, "dataset has zero features");
  }
  std::unordered_set<std::string_view> ids;
  ids.reserve(instances_.size());
  for (const auto& inst : instances_) {
    if (inst.features.size() != dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "instance '" + inst.id + "' has " + std::to_string(inst.features.size()) +
                      " features, expected " + std::to_string(dim_));
    }
    for (double v : inst.features) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::InvalidDataset, "instance '" + inst.id + "' has a non-finite feature");
      }
    }
    if (!ids.insert(inst.id).second) {
      throw Error(ErrorCode::InvalidDataset, "duplicate instance id '" + inst.id + "'");
    }
  }
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(instances_.begin(), instances_.end(),
                                                [label](const auto& i) { return i.label == label; }));
}

std::vector<Label> Dataset::labels() const {
  std::vector<Label> out;
  out.reserve(instances_.size());
  for (const auto& inst : instances_) out.push_back(inst.label);
  return out;
}

Label Dataset::dominant_label() const {
  return count(Label::Positive) > count(Label::Negative) ? Label::Positive : Label::Negative;
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
  std::vector<LabeledInstance> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back(instances_.at(p));
  return Dataset(std::move(out));
}

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "split.test_fraction must lie strictly inside (0,1)");
  }
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "split.calibration_fraction must lie strictly inside (0,1)");
  }
  if (repeats < 1) {
    throw Error(ErrorCode::ConfigError, "split.repeats must be at least 1");
  }
}

namespace {

Label parse_label(std::string_view raw, std::size_t row) {
  const std::string v = detail::lower(detail::trim(raw));
  if (v == "1" || v == "active") return Label::Positive;
  if (v == "0" || v == "inactive") return Label::Negative;
  throw Error(ErrorCode::UnknownLabelValue,
              "row " + std::to_string(row) + ": unknown label value '" + std::string(raw) + "'");
}

}  // namespace

Dataset parse_dataset(std::string_view csv_text, std::string_view label_column) {
  std::vector<std::string_view> lines = detail::split_lines(csv_text);
  if (lines.empty()) {
    throw Error(ErrorCode::EmptyDataset, "dataset file has no header row");
  }
  const std::vector<std::string> header = detail::split_csv_row(lines.front());
  std::ptrdiff_t label_col = -1;
  std::ptrdiff_t id_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = detail::trim(header[c]);
    if (name == label_column) label_col = static_cast<std::ptrdiff_t>(c);
    if (name == "id") id_col = static_cast<std::ptrdiff_t>(c);
  }
  if (label_col < 0) {
    throw Error(ErrorCode::MissingColumn, "missing label column '" + std::string(label_column) + "'");
  }

  std::vector<LabeledInstance> instances;
  std::size_t row = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (detail::trim(lines[l]).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_csv_row(lines[l]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MalformedCsv, "row " + std::to_string(row) + ": expected " +
                                               std::to_string(header.size()) + " fields, got " +
                                               std::to_string(cells.size()));
    }
    LabeledInstance inst;
    inst.label = parse_label(cells[static_cast<std::size_t>(label_col)], row);
    inst.id = id_col >= 0 ? detail::trim(cells[static_cast<std::size_t>(id_col)]) : std::to_string(row - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == label_col || static_cast<std::ptrdiff_t>(c) == id_col) continue;
      auto value = detail::parse_double(cells[c]);
      if (!value || !std::isfinite(*value)) {
        throw NonNumericFeatureError(row, c,
                                     "row " + std::to_string(row) + ", column " + std::to_string(c) +
                                         " ('" + detail::trim(header[c]) + "'): non-numeric feature '" +
                                         cells[c] + "'");
      }
      inst.features.push_back(*value);
    }
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) {
    throw Error(ErrorCode::EmptyDataset, "dataset file has no data rows");
  }
  return Dataset(std::move(instances));
}

Dataset load_dataset(const std::filesystem::path& path, std::string_view label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open dataset '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), label_column);
}

std::string format_dataset(const Dataset& ds) {
  std::string out = "id,label";
  for (std::size_t j = 0; j < ds.dim(); ++j) out += ",x" + std::to_string(j);
  out += '\n';
  for (const auto& inst : ds.instances()) {
    out += inst.id;
    out += inst.label == Label::Positive ? ",active" : ",inactive";
    for (double v : inst.features) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  detail::write_file_atomic(path, format_dataset(ds));
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2 || spec.dim < 1) {
    throw Error(ErrorCode::DegenerateRequest, "synthetic data needs n >= 2 and dim >= 1");
  }
  if (!(spec.class_balance > 0.0 && spec.class_balance < 1.0)) {
    throw Error(ErrorCode::DegenerateRequest, "class balance must lie strictly inside (0,1)");
  }
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
    throw Error(ErrorCode::DegenerateRequest, "separation must be finite and nonnegative");
  }
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(spec.n) * spec.class_balance));
  if (n_pos == 0 || n_pos == spec.n) {
    throw Error(ErrorCode::DegenerateRequest,
                "round(n * balance) = " + std::to_string(n_pos) + " leaves one class empty");
  }

  Rng label_rng(derive_seed(spec.seed, "synth_order", 0));
  std::vector<Label> labels(spec.n, Label::Negative);
  std::fill_n(labels.begin(), n_pos, Label::Positive);
  label_rng.shuffle(labels);

  Rng rng(derive_seed(spec.seed, "synth_features", 0));
  const double offset = spec.separation / 2.0;
  std::vector<LabeledInstance> instances(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto& inst = instances[i];
    inst.label = labels[i];
    inst.id = std::to_string(i);
    inst.features.resize(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) inst.features[j] = rng.normal();
    inst.features[0] += inst.label == Label::Positive ? offset : -offset;
  }
  return Dataset(std::move(instances));
}

namespace {

std::size_t held_out_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

void require_both_classes(const std::vector<std::size_t>& idx, const Dataset& ds, const char* side) {
  bool pos = false, neg = false;
  for (std::size_t i : idx) (ds[i].label == Label::Positive ? pos : neg) = true;
  if (!pos || !neg) {
    throw Error(ErrorCode::InsufficientClassMembers,
                std::string("split leaves the ") + side + " side without both classes");
  }
}

}  // namespace

Partition partition_dataset(const Dataset& ds, double fraction, bool stratified, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "split fraction must lie strictly inside (0,1)");
  }
  const std::size_t n = ds.size();
  const std::size_t k = held_out_count(n, fraction);
  Rng rng(seed);

  std::vector<std::size_t> held;
  if (stratified) {
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < n; ++i) (ds[i].label == Label::Positive ? pos_idx : neg_idx).push_back(i);
    if (pos_idx.size() < 2 || neg_idx.size() < 2) {
      throw Error(ErrorCode::InsufficientClassMembers,
                  "stratified split needs at least 2 instances per class (have " +
                      std::to_string(pos_idx.size()) + " positive, " + std::to_string(neg_idx.size()) +
                      " negative)");
    }
    auto k_pos = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(pos_idx.size()) / static_cast<double>(n)));
    k_pos = std::clamp<std::size_t>(k_pos, 1, pos_idx.size() - 1);
    std::size_t k_neg = k > k_pos ? k - k_pos : 0;
    k_neg = std::clamp<std::size_t>(k_neg, 1, neg_idx.size() - 1);
    rng.shuffle(pos_idx);
    rng.shuffle(neg_idx);
    held.assign(pos_idx.begin(), pos_idx.begin() + static_cast<std::ptrdiff_t>(k_pos));
    held.insert(held.end(), neg_idx.begin(), neg_idx.begin() + static_cast<std::ptrdiff_t>(k_neg));
  } else {
    if (k == 0 || k == n) {
      throw Error(ErrorCode::InsufficientClassMembers, "split fraction leaves one side empty");
    }
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    rng.shuffle(all);
    held.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  }

  std::sort(held.begin(), held.end());
  std::vector<std::size_t> kept;
  kept.reserve(n - held.size());
  for (std::size_t i = 0, h = 0; i < n; ++i) {
    if (h < held.size() && held[h] == i) {
      ++h;
    } else {
      kept.push_back(i);
    }
  }
  require_both_classes(kept, ds, "retained");
  require_both_classes(held, ds, "held-out");
  return Partition{ds.subset(kept), ds.subset(held)};
}

Partition split_train_test(const Dataset& ds, const SplitSpec& spec, std::size_t repeat_index) {
  spec.validate();
  return partition_dataset(ds, spec.test_fraction, spec.stratified,
                           derive_seed(spec.master_seed, "split", repeat_index));
}

Partition split_proper_calibration(const Dataset& train, const SplitSpec& spec, std::size_t resample_index) {
  spec.validate();
  return partition_dataset(train, spec.calibration_fraction, spec.stratified,
                           derive_seed(spec.master_seed, "calibration", resample_index));
}

}  // namespace mcpeval
