#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "osanet/cohort.hpp"

namespace osanet::metrics {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 4x4 true-vs-predicted counts; rows are the true class, columns the
// predicted one.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, cohort::kNumClasses>, cohort::kNumClasses> counts{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t true_class) const;
  std::uint64_t col_sum(std::size_t predicted_class) const;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions,
                          std::span<const std::uint8_t> labels);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Cleared when the corresponding denominator was zero (the score itself is
  // then reported as 0).
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

struct ClassReport {
  ConfusionMatrix matrix;
  std::array<ClassScores, cohort::kNumClasses> per_class;
  double accuracy = 0.0;
  // Mean cross-entropy over the same segments, when the caller evaluated one.
  std::optional<double> mean_loss;
};

// Derives per-class precision/recall/F1 and overall accuracy from the counts.
// Throws MetricsError on an all-zero matrix.
ClassReport report(const ConfusionMatrix& cm, std::optional<double> mean_loss = std::nullopt);

std::string to_json(const ClassReport& rep);

// Aligned table, 4 decimal places per score.
std::string to_text(const ClassReport& rep);

}  // namespace osanet::metrics
