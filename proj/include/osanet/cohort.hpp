#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace osanet::cohort {

class CohortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Four OSA severity grades, ordered. The indices are load-bearing: class c of
// every tensor, confusion matrix and split is this enum's value.
enum class SeverityLabel : std::uint8_t { NL = 0, MIN = 1, MOD = 2, SV = 3 };

constexpr std::size_t kNumClasses = 4;

const char* to_string(SeverityLabel label);
std::optional<SeverityLabel> label_from_string(std::string_view text);

// Severity bands over oahi3 (events per hour), upper bounds inclusive:
//   (0, 1] NL, (1, 5] MIN, (5, 10] MOD, (10, inf) SV.
// oahi3 == 0 maps to NL. Negative or non-finite values are rejected.
SeverityLabel label_from_oahi3(double oahi3);

struct Subject {
  std::string subject_id;
  std::string edf_path;
  double oahi3 = 0.0;
  SeverityLabel label = SeverityLabel::NL;
};

class Cohort {
 public:
  Cohort() = default;
  explicit Cohort(std::vector<Subject> subjects);

  const std::vector<Subject>& subjects() const { return subjects_; }
  const std::array<std::size_t, kNumClasses>& per_class_counts() const { return counts_; }
  std::size_t size() const { return subjects_.size(); }

 private:
  std::vector<Subject> subjects_;
  std::array<std::size_t, kNumClasses> counts_{};
};

// Uniform without-replacement selection of `per_class` subjects from every
// class; input order is preserved among the survivors. Deterministic in the
// seed. Classes with fewer than `per_class` subjects are an error.
Cohort undersample(const Cohort& cohort, std::size_t per_class, std::uint64_t seed);

// Manifest CSV: header `subject_id,edf_path,oahi3` with an optional trailing
// `label` column that must agree with the oahi3 band. Relative edf paths are
// resolved against the manifest's directory.
Cohort load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Cohort& cohort);

}  // namespace osanet::cohort
