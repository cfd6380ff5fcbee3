#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace osanet::edf {

// Parse/serialization failure. Carries the byte offset where the problem was
// detected when one is meaningful.
class EdfError : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit EdfError(const std::string& msg, std::size_t byte_offset = npos);
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct DateTime {
  int year = 1985;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;
};

struct EdfHeader {
  std::string version;           // 8-char tag, "0" for standard EDF
  std::string patient_id;
  std::string recording_id;
  DateTime start;
  int header_bytes = 0;          // must equal 256 + 256 * num_signals
  long long num_records = -1;    // -1 in the file means unknown
  double record_duration = 1.0;  // seconds, > 0
  int num_signals = 0;
};

struct SignalSpec {
  std::string label;
  std::string transducer;
  std::string physical_dimension;
  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  std::string prefiltering;
  long long samples_per_record = 0;

  double sampling_rate(double record_duration) const {
    return static_cast<double>(samples_per_record) / record_duration;
  }
  bool operator==(const SignalSpec&) const = default;
};

// One channel's physical-unit samples, concatenated across data records.
struct SignalTrace {
  std::string label;
  double sampling_rate = 0.0;  // Hz
  std::vector<double> samples;

  double duration_sec() const {
    return sampling_rate > 0.0 ? static_cast<double>(samples.size()) / sampling_rate : 0.0;
  }
};

// Non-fatal oddities encountered while parsing.
struct ParseReport {
  std::size_t clamped_samples = 0;        // digital values outside the declared range
  std::size_t replaced_header_bytes = 0;  // bytes >= 0x80 replaced with '?'
  bool num_records_from_size = false;     // header said -1, resolved from file length
};

// Decodes the fixed 256-byte header plus the 256-byte-per-signal header block.
// `raw` is the whole file (or at least the full header region). A num_records
// of -1 is resolved from the file size. Pure: same bytes, same result.
std::pair<EdfHeader, std::vector<SignalSpec>> parse_header(
    std::span<const std::uint8_t> raw, ParseReport* report = nullptr);

// Extracts one signal across all data records and applies the digital ->
// physical affine map. Out-of-range digital samples are clamped and counted
// in the report.
SignalTrace read_signal(std::span<const std::uint8_t> raw, const EdfHeader& header,
                        const std::vector<SignalSpec>& specs, std::size_t signal_index,
                        ParseReport* report = nullptr);

// Serializes a standard EDF file: fixed header, per-signal headers, then data
// records of little-endian int16, signals interleaved record by record.
// `physical` holds one sample vector per signal, each of length
// num_records * samples_per_record; values are quantized to the digital range
// (round to nearest, clamped). header.header_bytes is derived, not read.
std::vector<std::uint8_t> write_edf(const EdfHeader& header,
                                    const std::vector<SignalSpec>& specs,
                                    const std::vector<std::vector<double>>& physical);

void write_edf_file(const std::filesystem::path& path, const EdfHeader& header,
                    const std::vector<SignalSpec>& specs,
                    const std::vector<std::vector<double>>& physical);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace osanet::edf
