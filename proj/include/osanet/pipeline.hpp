#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "osanet/cohort.hpp"
#include "osanet/edf.hpp"

namespace osanet::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GroupName { ECG, EEG, EMG, RESP };

const char* to_string(GroupName name);
std::optional<GroupName> group_from_string(std::string_view text);

// A named set of EDF channel labels that are stacked on the channel axis.
// The standard groups carry 2/4/3/3 channels respectively.
struct ChannelGroup {
  GroupName name;
  std::vector<std::string> channel_labels;
};

// ECG1/ECG2; C3/C4/A1/A2; EMG1-3; AIRFLOW/THORACIC/ABDOMINAL.
ChannelGroup standard_group(GroupName name);

// Sleep interval in seconds from recording start; everything outside is
// treated as awake noise and dropped.
struct SleepWindow {
  std::string subject_id;
  double onset_sec = 0.0;
  double offset_sec = 0.0;
};

// Sidecar CSV: `subject_id,sleep_onset_sec,sleep_offset_sec`.
std::map<std::string, SleepWindow> load_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<SleepWindow>& windows);

// Keeps samples in [floor(onset*rate), floor(offset*rate)).
edf::SignalTrace trim_awake(const edf::SignalTrace& trace, const SleepWindow& window);

// Consecutive non-overlapping windows of seq_len samples; the trailing
// remainder is dropped. A trace shorter than seq_len yields an empty list.
std::vector<std::vector<double>> segment(std::span<const double> samples, std::size_t seq_len);

// Z-score with population (divide-by-N) standard deviation. Inputs with
// std < 1e-12 come back as all zeros.
std::vector<double> normalize(std::span<const double> values);

struct ChannelWindows {
  std::string label;
  double sampling_rate = 0.0;
  std::vector<std::vector<double>> windows;
};

struct SubjectSegments {
  std::string subject_id;
  cohort::SeverityLabel label = cohort::SeverityLabel::NL;
  std::vector<ChannelWindows> channels;  // one entry per group channel, in group order
};

// N x seq_len x C float tensor with one severity label and subject id per row.
struct SegmentTensor {
  std::size_t seq_len = 0;
  std::size_t channels = 0;
  std::vector<float> values;                 // row-major (n, t, c)
  std::vector<std::uint8_t> labels;          // length N
  std::vector<std::uint32_t> subject_index;  // length N, into subject_table
  std::vector<std::string> subject_table;

  std::size_t size() const { return labels.size(); }
  const std::string& subject_id(std::size_t n) const { return subject_table[subject_index[n]]; }
  const float* row(std::size_t n) const { return values.data() + n * seq_len * channels; }
  float* row(std::size_t n) { return values.data() + n * seq_len * channels; }
};

// Stacks per-channel windows into rows; every row inherits its subject's
// label. All channels of a subject must agree on sampling rate, window count
// and window length, and the channel list must match the group definition.
SegmentTensor assemble(const ChannelGroup& group, const std::vector<SubjectSegments>& subjects);

// Flat binary container: magic "OSNTENS1", u64 N/seq_len/C (little endian),
// float32 values, N label bytes, then the subject-id table (u64 count,
// length-prefixed ids, u32 row index per segment).
void save_tensor(const std::filesystem::path& path, const SegmentTensor& tensor);
SegmentTensor load_tensor(const std::filesystem::path& path);

// Full per-subject pipeline over a cohort: parse EDF, trim (when a sleep
// window is present; otherwise the whole trace is used and a warning is
// recorded), normalize per channel, segment, assemble. Errors carry the
// subject id.
SegmentTensor build_tensor(const cohort::Cohort& cohort, const ChannelGroup& group,
                           const std::map<std::string, SleepWindow>& annotations,
                           double seq_seconds, std::vector<std::string>* warnings = nullptr);

}  // namespace osanet::pipeline
