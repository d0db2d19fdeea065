#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "faith/dataset.hpp"
#include "faith/types.hpp"

#include "json.hpp"

namespace faith {

// Positional accuracy after padding both sequences to length 4 with a
// "no manipulation" symbol: matches / 4.
double fixed_acc(const EditSequence& pred, const EditSequence& gt);

// Accuracy over the first min(len(pred), len(gt)) positions. When that
// minimum is zero: 1.0 if both are empty, else 0.0 (a false positive or a
// miss on a clean image scores zero).
double adaptive_acc(const EditSequence& pred, const EditSequence& gt);

// 1.0 iff the sequences are identical (same length, same order), else 0.0.
double full_acc(const EditSequence& pred, const EditSequence& gt);

struct MetricsRow {
  double fixed = 0.0;
  double adaptive = 0.0;
  double full = 0.0;
  long count = 0;
};

// Per-length rows (ground-truth lengths 0..4) plus the average row: the
// unweighted mean over the length buckets that contain samples.
struct MetricsReport {
  std::array<MetricsRow, kMaxSequenceLength + 1> per_length{};
  MetricsRow average{};

  // Aligned text table, accuracies in percent.
  std::string to_table() const;
  nlohmann::ordered_json to_json() const;
};

// Runs the predictor on every record and aggregates the three metrics by
// ground-truth sequence length. Throws on an empty record list.
MetricsReport evaluate(const std::function<EditSequence(const SampleRecord&)>& predict,
                       const std::vector<SampleRecord>& records);

}  // namespace faith
