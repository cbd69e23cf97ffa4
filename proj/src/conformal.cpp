#include "mcpeval/conformal.hpp"

#include <algorithm>

#include "mcpeval/error.hpp"
#include "text_util.hpp"

namespace mcpeval {

const char* to_string(PredictionSet set) {
  switch (set) {
    case PredictionSet::PositiveOnly: return "positive";
    case PredictionSet::NegativeOnly: return "negative";
    case PredictionSet::Both: return "both";
    case PredictionSet::Empty: return "empty";
  }
  return "empty";
}

std::optional<PredictionSet> parse_prediction_set(std::string_view text) {
  const std::string v = detail::lower(detail::trim(text));
  if (v == "positive") return PredictionSet::PositiveOnly;
  if (v == "negative") return PredictionSet::NegativeOnly;
  if (v == "both") return PredictionSet::Both;
  if (v == "empty") return PredictionSet::Empty;
  return std::nullopt;
}

bool contains(PredictionSet set, Label label) {
  switch (set) {
    case PredictionSet::Both: return true;
    case PredictionSet::Empty: return false;
    case PredictionSet::PositiveOnly: return label == Label::Positive;
    case PredictionSet::NegativeOnly: return label == Label::Negative;
  }
  return false;
}

Epsilon::Epsilon(double significance) : significance_(significance) {
  if (!(significance > 0.0 && significance < 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "significance must lie strictly inside (0,1), got " + detail::format_double(significance));
  }
}

std::vector<Epsilon> default_epsilon_grid() { return {Epsilon(0.30), Epsilon(0.20), Epsilon(0.10)}; }

double nonconformity(double proba_pos, Label label) {
  return label == Label::Positive ? 1.0 - proba_pos : proba_pos;
}

namespace {

void check_scores(const std::vector<double>& scores, const char* cls) {
  if (scores.empty()) {
    throw Error(ErrorCode::EmptyClassCalibration, std::string("calibration table has no ") + cls + " scores");
  }
  if (!std::is_sorted(scores.begin(), scores.end())) {
    throw Error(ErrorCode::InvalidArgument, std::string(cls) + " calibration scores are not sorted");
  }
  if (!(scores.front() >= 0.0) || !(scores.back() <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, std::string(cls) + " calibration scores fall outside [0,1]");
  }
}

}  // namespace

CalibrationTable::CalibrationTable(std::vector<double> pos_scores, std::vector<double> neg_scores)
    : pos_(std::move(pos_scores)), neg_(std::move(neg_scores)) {
  check_scores(pos_, "positive");
  check_scores(neg_, "negative");
}

CalibrationTable build_calibration(const PointModel& model, const Dataset& calibration) {
  std::vector<double> pos, neg;
  for (const auto& inst : calibration.instances()) {
    const double score = nonconformity(model.predict_proba(inst.features), inst.label);
    (inst.label == Label::Positive ? pos : neg).push_back(score);
  }
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorCode::EmptyClassCalibration,
                std::string("calibration set has no ") + (pos.empty() ? "positive" : "negative") + " instances");
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  return CalibrationTable(std::move(pos), std::move(neg));
}

namespace {

double class_p_value(const std::vector<double>& sorted, double alpha) {
  const auto first_at_least = std::lower_bound(sorted.begin(), sorted.end(), alpha);
  const auto at_least = static_cast<double>(sorted.end() - first_at_least);
  return (at_least + 1.0) / (static_cast<double>(sorted.size()) + 1.0);
}

}  // namespace

PValuePair p_values(const CalibrationTable& table, double proba_pos) {
  return PValuePair{class_p_value(table.pos_scores(), nonconformity(proba_pos, Label::Positive)),
                    class_p_value(table.neg_scores(), nonconformity(proba_pos, Label::Negative))};
}

PredictionSet prediction_set(const PValuePair& p, Epsilon eps) {
  const bool pos = p.p_pos > eps.significance();
  const bool neg = p.p_neg > eps.significance();
  if (pos && neg) return PredictionSet::Both;
  if (pos) return PredictionSet::PositiveOnly;
  if (neg) return PredictionSet::NegativeOnly;
  return PredictionSet::Empty;
}

std::string format_prediction_dump(const PredictionDump& dump) {
  const bool with_repeat = !dump.records.empty() && dump.records.front().repeat.has_value();
  const bool with_dominant = !dump.records.empty() && dump.records.front().train_dominant.has_value();
  std::string out = with_repeat ? "repeat,id,true_label,proba_pos,p_pos,p_neg" : "id,true_label,proba_pos,p_pos,p_neg";
  if (with_dominant) out += ",train_dominant";
  for (const auto& eps : dump.epsilons) out += ",set_" + detail::format_shortest(eps.significance());
  out += '\n';
  for (const auto& r : dump.records) {
    if (r.sets.size() != dump.epsilons.size()) {
      throw Error(ErrorCode::LengthMismatch, "prediction record '" + r.id + "' has the wrong number of sets");
    }
    if (with_repeat) out += std::to_string(r.repeat.value_or(0)) + ",";
    out += r.id;
    out += r.truth == Label::Positive ? ",1," : ",0,";
    out += detail::format_double(r.proba_pos) + "," + detail::format_double(r.p.p_pos) + "," +
           detail::format_double(r.p.p_neg);
    if (with_dominant) out += r.train_dominant.value_or(Label::Negative) == Label::Positive ? ",1" : ",0";
    for (auto s : r.sets) {
      out += ',';
      out += to_string(s);
    }
    out += '\n';
  }
  return out;
}

namespace {

[[noreturn]] void malformed(std::size_t row, const std::string& what) {
  throw Error(ErrorCode::MalformedCsv, "row " + std::to_string(row) + ": " + what);
}

}  // namespace

PredictionDump parse_prediction_dump(std::string_view csv_text) {
  const auto lines = detail::split_lines(csv_text);
  if (lines.empty()) throw Error(ErrorCode::MalformedCsv, "predictions file is empty");
  const auto header = detail::split_csv_row(lines.front());

  std::optional<std::size_t> repeat_col, id_col, truth_col, proba_col, ppos_col, pneg_col, dominant_col;
  std::vector<std::size_t> set_cols;
  PredictionDump dump;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = detail::trim(header[c]);
    if (name == "repeat") repeat_col = c;
    else if (name == "id") id_col = c;
    else if (name == "true_label") truth_col = c;
    else if (name == "proba_pos") proba_col = c;
    else if (name == "p_pos") ppos_col = c;
    else if (name == "p_neg") pneg_col = c;
    else if (name == "train_dominant") dominant_col = c;
    else if (name.rfind("set_", 0) == 0) {
      auto eps = detail::parse_double(std::string_view(name).substr(4));
      if (!eps || !(*eps > 0.0 && *eps < 1.0)) {
        throw Error(ErrorCode::MalformedCsv, "header: cannot read significance from column '" + name + "'");
      }
      dump.epsilons.emplace_back(*eps);
      set_cols.push_back(c);
    }
  }
  if (!truth_col) throw Error(ErrorCode::MalformedCsv, "header: missing true_label column");
  if (set_cols.empty()) throw Error(ErrorCode::MalformedCsv, "header: no set_<significance> columns");

  std::size_t row = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (detail::trim(lines[l]).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_row(lines[l]);
    if (cells.size() != header.size()) malformed(row, "wrong number of fields");
    PredictionRecord r;
    if (repeat_col) {
      auto rep = detail::parse_uint(cells[*repeat_col]);
      if (!rep) malformed(row, "bad repeat index");
      r.repeat = static_cast<std::size_t>(*rep);
    }
    r.id = id_col ? detail::trim(cells[*id_col]) : std::to_string(row - 1);
    auto read_label = [&](std::size_t col, const char* what) {
      const std::string v = detail::lower(detail::trim(cells[col]));
      if (v == "1" || v == "active" || v == "positive") return Label::Positive;
      if (v == "0" || v == "inactive" || v == "negative") return Label::Negative;
      malformed(row, std::string("unknown ") + what + " '" + v + "'");
    };
    r.truth = read_label(*truth_col, "true_label");
    if (dominant_col) r.train_dominant = read_label(*dominant_col, "train_dominant");
    auto read_real = [&](std::optional<std::size_t> col, double& into, const char* what) {
      if (!col) return;
      auto v = detail::parse_double(cells[*col]);
      if (!v) malformed(row, std::string("bad ") + what);
      into = *v;
    };
    read_real(proba_col, r.proba_pos, "proba_pos");
    read_real(ppos_col, r.p.p_pos, "p_pos");
    read_real(pneg_col, r.p.p_neg, "p_neg");
    for (std::size_t c : set_cols) {
      auto s = parse_prediction_set(cells[c]);
      if (!s) malformed(row, "unknown prediction set '" + cells[c] + "'");
      r.sets.push_back(*s);
    }
    dump.records.push_back(std::move(r));
  }
  if (dump.records.empty()) throw Error(ErrorCode::MalformedCsv, "predictions file has no data rows");
  return dump;
}

}  // namespace mcpeval
