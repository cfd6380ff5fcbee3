#include "osanet/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace osanet::metrics {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts)
    for (std::uint64_t c : row) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) n += counts[c][c];
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t true_class) const {
  std::uint64_t n = 0;
  for (std::uint64_t c : counts[true_class]) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted_class) const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n += row[predicted_class];
  return n;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions,
                          std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size()) {
    throw MetricsError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                       std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= cohort::kNumClasses || predictions[i] >= cohort::kNumClasses) {
      throw MetricsError("confusion: class out of range at index " + std::to_string(i));
    }
    ++cm.counts[labels[i]][predictions[i]];
  }
  return cm;
}

ClassReport report(const ConfusionMatrix& cm, std::optional<double> mean_loss) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw MetricsError("report: confusion matrix is empty");

  ClassReport rep;
  rep.matrix = cm;
  rep.mean_loss = mean_loss;
  rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    ClassScores& s = rep.per_class[c];
    const std::uint64_t tp = cm.counts[c][c];
    const std::uint64_t col = cm.col_sum(c);
    const std::uint64_t row = cm.row_sum(c);
    if (col == 0) {
      s.precision_defined = false;  // nothing was predicted as this class
    } else {
      s.precision = static_cast<double>(tp) / static_cast<double>(col);
    }
    if (row == 0) {
      s.recall_defined = false;  // class absent from the labels
    } else {
      s.recall = static_cast<double>(tp) / static_cast<double>(row);
    }
    if (s.precision + s.recall > 0.0) {
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    } else {
      s.f1 = 0.0;
      s.f1_defined = s.precision_defined && s.recall_defined;
    }
  }
  return rep;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string to_json(const ClassReport& rep) {
  std::ostringstream out;
  out << "{\n  \"accuracy\": " << fixed4(rep.accuracy) << ",\n";
  if (rep.mean_loss) {
    out << "  \"mean_loss\": " << fixed4(*rep.mean_loss) << ",\n";
  }
  out << "  \"classes\": {";
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    const ClassScores& s = rep.per_class[c];
    out << (c ? ",\n" : "\n");
    out << "    \"" << cohort::to_string(static_cast<cohort::SeverityLabel>(c)) << "\": {"
        << "\"precision\": " << fixed4(s.precision) << ", \"recall\": " << fixed4(s.recall)
        << ", \"f1\": " << fixed4(s.f1);
    if (!s.precision_defined || !s.recall_defined || !s.f1_defined) {
      out << ", \"undefined\": [";
      bool first = true;
      auto add = [&](bool flag, const char* name) {
        if (flag) return;
        out << (first ? "\"" : ", \"") << name << "\"";
        first = false;
      };
      add(s.precision_defined, "precision");
      add(s.recall_defined, "recall");
      add(s.f1_defined, "f1");
      out << "]";
    }
    out << "}";
  }
  out << "\n  },\n  \"confusion\": [";
  for (std::size_t t = 0; t < cohort::kNumClasses; ++t) {
    out << (t ? ", [" : "[");
    for (std::size_t p = 0; p < cohort::kNumClasses; ++p) {
      out << (p ? ", " : "") << rep.matrix.counts[t][p];
    }
    out << "]";
  }
  out << "]\n}\n";
  return out.str();
}

std::string to_text(const ClassReport& rep) {
  std::ostringstream out;
  char buf[128];

  out << "confusion matrix (rows true, columns predicted)\n";
  out << "        ";
  for (std::size_t p = 0; p < cohort::kNumClasses; ++p) {
    std::snprintf(buf, sizeof(buf), "%8s", cohort::to_string(static_cast<cohort::SeverityLabel>(p)));
    out << buf;
  }
  out << "\n";
  for (std::size_t t = 0; t < cohort::kNumClasses; ++t) {
    std::snprintf(buf, sizeof(buf), "%-8s", cohort::to_string(static_cast<cohort::SeverityLabel>(t)));
    out << buf;
    for (std::size_t p = 0; p < cohort::kNumClasses; ++p) {
      std::snprintf(buf, sizeof(buf), "%8llu",
                    static_cast<unsigned long long>(rep.matrix.counts[t][p]));
      out << buf;
    }
    out << "\n";
  }

  out << "\nclass    precision   recall       f1\n";
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    const ClassScores& s = rep.per_class[c];
    std::snprintf(buf, sizeof(buf), "%-8s    %.4f   %.4f   %.4f",
                  cohort::to_string(static_cast<cohort::SeverityLabel>(c)), s.precision, s.recall,
                  s.f1);
    out << buf;
    if (!s.precision_defined || !s.recall_defined) out << "  (zero denominator)";
    out << "\n";
  }

  std::snprintf(buf, sizeof(buf), "\naccuracy    %.4f\n", rep.accuracy);
  out << buf;
  if (rep.mean_loss) {
    std::snprintf(buf, sizeof(buf), "loss        %.4f\n", *rep.mean_loss);
    out << buf;
  }
  return out.str();
}

}  // namespace osanet::metrics
