#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "osanet/cohort.hpp"

namespace osanet::synth {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// What makes severity class c look different: periodic Hann-windowed
// oscillation bursts riding on the base rhythm. Rate, size and carrier pitch
// all scale with severity, so every segment is separable by construction.
struct ClassSignature {
  double burst_rate_per_min = 0.0;
  double burst_amp = 0.0;
  double carrier_freq_hz = 0.0;
};

struct SynthSpec {
  std::size_t subjects_per_class = 8;
  double duration_sec = 1200.0;  // 20-minute desk-scale recordings
  double awake_head_sec = 60.0;  // annotated awake margins, trimmed downstream
  double awake_tail_sec = 60.0;
  double record_duration_sec = 1.0;

  // One rate per channel group: ECG, EEG, EMG, RESP.
  std::array<double, 4> group_rate_hz = {64.0, 64.0, 64.0, 64.0};

  double base_freq_hz = 1.0;  // common background rhythm, per-channel detuned
  double base_amp = 1.0;
  double burst_len_sec = 1.0;
  std::array<ClassSignature, cohort::kNumClasses> signatures = {{
      {6.0, 0.5, 2.0},   // NL
      {12.0, 1.0, 5.0},  // MIN
      {18.0, 1.5, 8.0},  // MOD
      {24.0, 2.0, 11.0}, // SV
  }};

  double noise_level = 0.05;  // white-noise standard deviation
  std::uint64_t seed = 1;
  std::string id_prefix = "synth";
};

struct GeneratedCohort {
  cohort::Cohort cohort;
  std::filesystem::path manifest_path;
  std::filesystem::path annotations_path;
};

// Writes one 12-channel EDF per subject plus manifest.csv and
// annotations.csv into out_dir. Every subject's oahi3 is drawn strictly
// inside its class band, and generation is deterministic in spec.seed (one
// derived sub-seed per subject, independent of ordering).
GeneratedCohort generate_cohort(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace osanet::synth
