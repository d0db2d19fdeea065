#include "faith/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "faith/threading.hpp"

namespace faith {

namespace {

void check_length(const EditSequence& s, const char* who) {
  if (s.size() > static_cast<size_t>(kMaxSequenceLength))
    throw std::invalid_argument(std::string(who) + ": sequence length " +
                                std::to_string(s.size()) + " exceeds 4");
}

constexpr int kNoEdit = -1;

std::array<int, kMaxSequenceLength> pad4(const EditSequence& s) {
  std::array<int, kMaxSequenceLength> out;
  for (int i = 0; i < kMaxSequenceLength; ++i)
    out[i] = i < static_cast<int>(s.size()) ? static_cast<int>(s[i]) : kNoEdit;
  return out;
}

}  // namespace

double fixed_acc(const EditSequence& pred, const EditSequence& gt) {
  check_length(pred, "fixed_acc");
  check_length(gt, "fixed_acc");
  const auto p = pad4(pred), g = pad4(gt);
  int matches = 0;
  for (int i = 0; i < kMaxSequenceLength; ++i)
    if (p[i] == g[i]) ++matches;
  return matches / static_cast<double>(kMaxSequenceLength);
}

double adaptive_acc(const EditSequence& pred, const EditSequence& gt) {
  check_length(pred, "adaptive_acc");
  check_length(gt, "adaptive_acc");
  const size_t m = std::min(pred.size(), gt.size());
  if (m == 0) return pred.size() == gt.size() ? 1.0 : 0.0;
  int matches = 0;
  for (size_t i = 0; i < m; ++i)
    if (pred[i] == gt[i]) ++matches;
  return matches / static_cast<double>(m);
}

double full_acc(const EditSequence& pred, const EditSequence& gt) {
  check_length(pred, "full_acc");
  check_length(gt, "full_acc");
  return pred == gt ? 1.0 : 0.0;
}

MetricsReport evaluate(const std::function<EditSequence(const SampleRecord&)>& predict,
                       const std::vector<SampleRecord>& records) {
  if (records.empty()) throw std::invalid_argument("evaluate: no records");
  struct Triple {
    double fixed, adaptive, full;
    int length;
  };
  std::vector<Triple> results(records.size());
  parallel_for(static_cast<int>(records.size()), [&](int i) {
    const EditSequence gt = records[i].sequence();
    const EditSequence pred = predict(records[i]);
    results[i] = {fixed_acc(pred, gt), adaptive_acc(pred, gt), full_acc(pred, gt),
                  static_cast<int>(gt.size())};
  });

  MetricsReport report;
  for (const auto& t : results) {
    auto& row = report.per_length[t.length];
    row.fixed += t.fixed;
    row.adaptive += t.adaptive;
    row.full += t.full;
    row.count += 1;
  }
  int buckets = 0;
  for (auto& row : report.per_length) {
    if (row.count == 0) continue;
    row.fixed /= static_cast<double>(row.count);
    row.adaptive /= static_cast<double>(row.count);
    row.full /= static_cast<double>(row.count);
    report.average.fixed += row.fixed;
    report.average.adaptive += row.adaptive;
    report.average.full += row.full;
    report.average.count += row.count;
    ++buckets;
  }
  report.average.fixed /= buckets;
  report.average.adaptive /= buckets;
  report.average.full /= buckets;
  return report;
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  out << "Length  Count  Fixed    Adaptive  Full\n";
  auto row = [&](const std::string& label, const MetricsRow& r) {
    std::string fixed = format_fixed(100.0 * r.fixed, 2);
    std::string adaptive = format_fixed(100.0 * r.adaptive, 2);
    std::string full = format_fixed(100.0 * r.full, 2);
    out << label << std::string(8 - label.size(), ' ');
    std::string count = std::to_string(r.count);
    out << count << std::string(count.size() < 7 ? 7 - count.size() : 1, ' ');
    out << fixed << std::string(fixed.size() < 9 ? 9 - fixed.size() : 1, ' ');
    out << adaptive << std::string(adaptive.size() < 10 ? 10 - adaptive.size() : 1, ' ');
    out << full << "\n";
  };
  for (int len = 0; len <= kMaxSequenceLength; ++len)
    row(std::to_string(len), per_length[len]);
  row("Avg.", average);
  return out.str();
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  auto encode = [](const MetricsRow& r) {
    nlohmann::ordered_json row;
    row["count"] = r.count;
    row["fixed_acc"] = r.fixed;
    row["adaptive_acc"] = r.adaptive;
    row["full_acc"] = r.full;
    return row;
  };
  j["per_length"] = nlohmann::ordered_json::array();
  for (int len = 0; len <= kMaxSequenceLength; ++len) {
    auto row = encode(per_length[len]);
    row["length"] = len;
    j["per_length"].push_back(std::move(row));
  }
  j["average"] = encode(average);
  return j;
}

}  // namespace faith
