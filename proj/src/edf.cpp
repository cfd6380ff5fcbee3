#include "osanet/edf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace osanet::edf {

namespace {

constexpr std::size_t kFixedHeaderBytes = 256;
constexpr std::size_t kPerSignalHeaderBytes = 256;

// Widths of the fixed header fields, in file order.
constexpr std::size_t kVersionW = 8, kPatientW = 80, kRecordingW = 80, kDateW = 8,
                      kTimeW = 8, kHeaderBytesW = 8, kReservedW = 44, kNumRecordsW = 8,
                      kDurationW = 8, kNumSignalsW = 4;

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return c != ' '; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

// Sequential reader over the ASCII header region.
class FieldCursor {
 public:
  FieldCursor(std::span<const std::uint8_t> raw, ParseReport* report)
      : raw_(raw), report_(report) {}

  std::size_t pos() const { return pos_; }

  // Reads `width` bytes as ASCII, replacing bytes >= 0x80, and trims padding.
  std::string take(std::size_t width, const char* field) {
    if (pos_ + width > raw_.size()) {
      throw EdfError(std::string("truncated header while reading '") + field + "'", pos_);
    }
    std::string out;
    out.reserve(width);
    for (std::size_t i = 0; i < width; ++i) {
      const std::uint8_t b = raw_[pos_ + i];
      if (b >= 0x80) {
        out.push_back('?');
        if (report_) ++report_->replaced_header_bytes;
      } else {
        out.push_back(static_cast<char>(b));
      }
    }
    pos_ += width;
    return trim(out);
  }

  long long take_int(std::size_t width, const char* field) {
    const std::size_t at = pos_;
    const std::string s = take(width, field);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw EdfError(std::string("non-numeric value '") + s + "' in field '" + field + "'", at);
    }
    return value;
  }

  double take_double(std::size_t width, const char* field) {
    const std::size_t at = pos_;
    const std::string s = take(width, field);
    char* end = nullptr;
    const double value = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw EdfError(std::string("non-numeric value '") + s + "' in field '" + field + "'", at);
    }
    return value;
  }

 private:
  std::span<const std::uint8_t> raw_;
  ParseReport* report_;
  std::size_t pos_ = 0;
};

bool parse_two_digits(const std::string& s, std::size_t at, int& out) {
  if (at + 1 >= s.size() || s[at] < '0' || s[at] > '9' || s[at + 1] < '0' || s[at + 1] > '9')
    return false;
  out = (s[at] - '0') * 10 + (s[at + 1] - '0');
  return true;
}

// "dd.mm.yy" / "hh.mm.ss". Malformed fields leave the defaults in place;
// real-world headers are too messy for this to be fatal.
DateTime parse_start(const std::string& date, const std::string& time) {
  DateTime dt;
  int d, mo, y;
  if (date.size() == 8 && date[2] == '.' && date[5] == '.' && parse_two_digits(date, 0, d) &&
      parse_two_digits(date, 3, mo) && parse_two_digits(date, 6, y)) {
    dt.day = d;
    dt.month = mo;
    dt.year = (y >= 85 ? 1900 + y : 2000 + y);  // EDF y2k pivot
  }
  int h, mi, s;
  if (time.size() == 8 && time[2] == '.' && time[5] == '.' && parse_two_digits(time, 0, h) &&
      parse_two_digits(time, 3, mi) && parse_two_digits(time, 6, s)) {
    dt.hour = h;
    dt.minute = mi;
    dt.second = s;
  }
  return dt;
}

std::size_t record_size_bytes(const std::vector<SignalSpec>& specs) {
  std::size_t samples = 0;
  for (const auto& s : specs) samples += static_cast<std::size_t>(s.samples_per_record);
  return samples * 2;
}

// Fixed-width ASCII field, left justified, space padded.
void put_field(std::vector<std::uint8_t>& out, const std::string& value, std::size_t width,
               const char* field) {
  if (value.size() > width) {
    throw EdfError(std::string("value '") + value + "' does not fit " + std::to_string(width) +
                   " bytes in field '" + field + "'");
  }
  for (char c : value) {
    if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) > 0x7e) {
      throw EdfError(std::string("non-ASCII character in field '") + field + "'");
    }
  }
  out.insert(out.end(), value.begin(), value.end());
  out.insert(out.end(), width - value.size(), static_cast<std::uint8_t>(' '));
}

// Shortest decimal text for a real-valued field that still round-trips
// through strtod, trying descending precision until it fits.
std::string format_real(double v, std::size_t width, const char* field) {
  for (int prec = 10; prec >= 0; --prec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    std::string s(buf);
    if (s.size() <= width && std::strtod(s.c_str(), nullptr) == v) return s;
    // 0.x / -0.x forms gain a character by shedding the leading zero
    std::string c = s;
    if (c.rfind("0.", 0) == 0) c.erase(0, 1);
    else if (c.rfind("-0.", 0) == 0) c.erase(1, 1);
    if (c != s && c.size() <= width && std::strtod(c.c_str(), nullptr) == v) return c;
  }
  // fall back to the tightest representation even if it loses precision
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", static_cast<int>(width > 6 ? 6 : width), v);
  std::string s(buf);
  if (s.size() > width) {
    throw EdfError(std::string("real value does not fit field '") + field + "'");
  }
  return s;
}

std::string format_two(int v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

}  // namespace

EdfError::EdfError(const std::string& msg, std::size_t byte_offset)
    : std::runtime_error(byte_offset == npos
                             ? msg
                             : msg + " (byte offset " + std::to_string(byte_offset) + ")"),
      offset_(byte_offset) {}

std::pair<EdfHeader, std::vector<SignalSpec>> parse_header(std::span<const std::uint8_t> raw,
                                                           ParseReport* report) {
  if (raw.size() < kFixedHeaderBytes) {
    throw EdfError("truncated file: " + std::to_string(raw.size()) +
                       " bytes, fixed header needs 256",
                   raw.size());
  }

  FieldCursor cur(raw, report);
  EdfHeader h;
  h.version = cur.take(kVersionW, "version");
  h.patient_id = cur.take(kPatientW, "patient_id");
  h.recording_id = cur.take(kRecordingW, "recording_id");
  const std::string date = cur.take(kDateW, "start_date");
  const std::string time = cur.take(kTimeW, "start_time");
  h.start = parse_start(date, time);
  h.header_bytes = static_cast<int>(cur.take_int(kHeaderBytesW, "header_bytes"));
  cur.take(kReservedW, "reserved");
  h.num_records = cur.take_int(kNumRecordsW, "num_records");
  h.record_duration = cur.take_double(kDurationW, "record_duration");
  h.num_signals = static_cast<int>(cur.take_int(kNumSignalsW, "num_signals"));

  if (h.num_signals < 1) {
    throw EdfError("num_signals must be >= 1, got " + std::to_string(h.num_signals));
  }
  if (!(h.record_duration > 0.0)) {
    throw EdfError("record_duration must be > 0, got " + std::to_string(h.record_duration));
  }
  const long long expected_bytes =
      static_cast<long long>(kFixedHeaderBytes) + 256LL * h.num_signals;
  if (h.header_bytes != expected_bytes) {
    throw EdfError("header_bytes " + std::to_string(h.header_bytes) + " inconsistent with 256 + 256*" +
                   std::to_string(h.num_signals) + " = " + std::to_string(expected_bytes));
  }
  if (raw.size() < static_cast<std::size_t>(h.header_bytes)) {
    throw EdfError("truncated file: header claims " + std::to_string(h.header_bytes) +
                       " header bytes, file has " + std::to_string(raw.size()),
                   raw.size());
  }

  // Signal headers are stored field-major: all labels, then all transducers, ...
  const std::size_t n = static_cast<std::size_t>(h.num_signals);
  std::vector<SignalSpec> specs(n);
  for (std::size_t i = 0; i < n; ++i) specs[i].label = cur.take(16, "label");
  for (std::size_t i = 0; i < n; ++i) specs[i].transducer = cur.take(80, "transducer");
  for (std::size_t i = 0; i < n; ++i)
    specs[i].physical_dimension = cur.take(8, "physical_dimension");
  for (std::size_t i = 0; i < n; ++i)
    specs[i].physical_min = cur.take_double(8, "physical_min");
  for (std::size_t i = 0; i < n; ++i)
    specs[i].physical_max = cur.take_double(8, "physical_max");
  for (std::size_t i = 0; i < n; ++i)
    specs[i].digital_min = static_cast<int>(cur.take_int(8, "digital_min"));
  for (std::size_t i = 0; i < n; ++i)
    specs[i].digital_max = static_cast<int>(cur.take_int(8, "digital_max"));
  for (std::size_t i = 0; i < n; ++i) specs[i].prefiltering = cur.take(80, "prefiltering");
  for (std::size_t i = 0; i < n; ++i)
    specs[i].samples_per_record = cur.take_int(8, "samples_per_record");
  for (std::size_t i = 0; i < n; ++i) cur.take(32, "signal_reserved");

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = specs[i];
    if (s.samples_per_record < 1) {
      throw EdfError("signal " + std::to_string(i) + " ('" + s.label +
                     "'): samples_per_record must be >= 1");
    }
    if (s.physical_max == s.physical_min) {
      throw EdfError("signal " + std::to_string(i) + " ('" + s.label +
                     "'): physical_max equals physical_min");
    }
    if (s.digital_max == s.digital_min) {
      throw EdfError("signal " + std::to_string(i) + " ('" + s.label +
                     "'): digital_max equals digital_min");
    }
  }

  if (h.num_records < 0) {
    const std::size_t rec_bytes = record_size_bytes(specs);
    const std::size_t data_bytes = raw.size() - static_cast<std::size_t>(h.header_bytes);
    h.num_records = rec_bytes == 0 ? 0 : static_cast<long long>(data_bytes / rec_bytes);
    if (report) report->num_records_from_size = true;
  }

  return {std::move(h), std::move(specs)};
}

SignalTrace read_signal(std::span<const std::uint8_t> raw, const EdfHeader& header,
                        const std::vector<SignalSpec>& specs, std::size_t signal_index,
                        ParseReport* report) {
  if (signal_index >= specs.size()) {
    throw EdfError("signal index " + std::to_string(signal_index) + " out of range (" +
                   std::to_string(specs.size()) + " signals)");
  }
  const std::size_t rec_bytes = record_size_bytes(specs);
  const std::size_t need = static_cast<std::size_t>(header.header_bytes) +
                           static_cast<std::size_t>(header.num_records) * rec_bytes;
  if (raw.size() < need) {
    throw EdfError("file shorter than implied by num_records: need " + std::to_string(need) +
                       " bytes, have " + std::to_string(raw.size()),
                   raw.size());
  }

  const SignalSpec& spec = specs[signal_index];
  std::size_t offset_in_record = 0;
  for (std::size_t i = 0; i < signal_index; ++i) {
    offset_in_record += static_cast<std::size_t>(specs[i].samples_per_record) * 2;
  }

  const double gain =
      (spec.physical_max - spec.physical_min) / (spec.digital_max - spec.digital_min);

  SignalTrace trace;
  trace.label = spec.label;
  trace.sampling_rate = spec.sampling_rate(header.record_duration);
  const std::size_t spr = static_cast<std::size_t>(spec.samples_per_record);
  trace.samples.reserve(spr * static_cast<std::size_t>(header.num_records));

  for (long long rec = 0; rec < header.num_records; ++rec) {
    const std::uint8_t* p = raw.data() + header.header_bytes +
                            static_cast<std::size_t>(rec) * rec_bytes + offset_in_record;
    for (std::size_t i = 0; i < spr; ++i) {
      int d = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[2 * i]) |
                                        (static_cast<std::uint16_t>(p[2 * i + 1]) << 8));
      const int lo = std::min(spec.digital_min, spec.digital_max);
      const int hi = std::max(spec.digital_min, spec.digital_max);
      if (d < lo || d > hi) {
        d = std::clamp(d, lo, hi);
        if (report) ++report->clamped_samples;
      }
      trace.samples.push_back(spec.physical_min + (d - spec.digital_min) * gain);
    }
  }
  return trace;
}

std::vector<std::uint8_t> write_edf(const EdfHeader& header, const std::vector<SignalSpec>& specs,
                                    const std::vector<std::vector<double>>& physical) {
  if (specs.empty()) throw EdfError("cannot write a file with zero signals");
  if (physical.size() != specs.size()) {
    throw EdfError("signal data count " + std::to_string(physical.size()) +
                   " does not match spec count " + std::to_string(specs.size()));
  }
  if (header.num_records < 0) throw EdfError("writer requires an explicit num_records");
  if (!(header.record_duration > 0.0)) throw EdfError("record_duration must be > 0");

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.samples_per_record < 1) throw EdfError("samples_per_record must be >= 1");
    if (s.physical_max == s.physical_min || s.digital_max == s.digital_min) {
      throw EdfError("degenerate physical/digital range on signal '" + s.label + "'");
    }
    if (s.digital_min < -32768 || s.digital_min > 32767 || s.digital_max < -32768 ||
        s.digital_max > 32767) {
      throw EdfError("digital range outside int16 on signal '" + s.label + "'");
    }
    const std::size_t expect =
        static_cast<std::size_t>(header.num_records) * static_cast<std::size_t>(s.samples_per_record);
    if (physical[i].size() != expect) {
      throw EdfError("signal '" + s.label + "': " + std::to_string(physical[i].size()) +
                     " samples, expected num_records*samples_per_record = " +
                     std::to_string(expect));
    }
  }

  const std::size_t header_bytes = kFixedHeaderBytes + kPerSignalHeaderBytes * specs.size();
  std::vector<std::uint8_t> out;
  out.reserve(header_bytes + record_size_bytes(specs) * static_cast<std::size_t>(header.num_records));

  put_field(out, header.version.empty() ? "0" : header.version, kVersionW, "version");
  put_field(out, header.patient_id, kPatientW, "patient_id");
  put_field(out, header.recording_id, kRecordingW, "recording_id");
  const DateTime& dt = header.start;
  put_field(out, format_two(dt.day) + "." + format_two(dt.month) + "." + format_two(dt.year % 100),
            kDateW, "start_date");
  put_field(out,
            format_two(dt.hour) + "." + format_two(dt.minute) + "." + format_two(dt.second),
            kTimeW, "start_time");
  put_field(out, std::to_string(header_bytes), kHeaderBytesW, "header_bytes");
  put_field(out, "", kReservedW, "reserved");
  put_field(out, std::to_string(header.num_records), kNumRecordsW, "num_records");
  put_field(out, format_real(header.record_duration, kDurationW, "record_duration"), kDurationW,
            "record_duration");
  put_field(out, std::to_string(specs.size()), kNumSignalsW, "num_signals");

  for (const auto& s : specs) put_field(out, s.label, 16, "label");
  for (const auto& s : specs) put_field(out, s.transducer, 80, "transducer");
  for (const auto& s : specs) put_field(out, s.physical_dimension, 8, "physical_dimension");
  for (const auto& s : specs)
    put_field(out, format_real(s.physical_min, 8, "physical_min"), 8, "physical_min");
  for (const auto& s : specs)
    put_field(out, format_real(s.physical_max, 8, "physical_max"), 8, "physical_max");
  for (const auto& s : specs) put_field(out, std::to_string(s.digital_min), 8, "digital_min");
  for (const auto& s : specs) put_field(out, std::to_string(s.digital_max), 8, "digital_max");
  for (const auto& s : specs) put_field(out, s.prefiltering, 80, "prefiltering");
  for (const auto& s : specs)
    put_field(out, std::to_string(s.samples_per_record), 8, "samples_per_record");
  for (const auto& s : specs) {
    (void)s;
    put_field(out, "", 32, "signal_reserved");
  }

  // Data records: little-endian int16, signals interleaved record by record.
  for (long long rec = 0; rec < header.num_records; ++rec) {
    for (std::size_t si = 0; si < specs.size(); ++si) {
      const SignalSpec& s = specs[si];
      const double inv_gain =
          (s.digital_max - s.digital_min) / (s.physical_max - s.physical_min);
      const std::size_t spr = static_cast<std::size_t>(s.samples_per_record);
      const double* src = physical[si].data() + static_cast<std::size_t>(rec) * spr;
      for (std::size_t i = 0; i < spr; ++i) {
        const double scaled = (src[i] - s.physical_min) * inv_gain + s.digital_min;
        const int lo = std::min(s.digital_min, s.digital_max);
        const int hi = std::max(s.digital_min, s.digital_max);
        const int d = std::clamp(static_cast<int>(std::lround(scaled)), lo, hi);
        out.push_back(static_cast<std::uint8_t>(d & 0xff));
        out.push_back(static_cast<std::uint8_t>((d >> 8) & 0xff));
      }
    }
  }
  return out;
}

void write_edf_file(const std::filesystem::path& path, const EdfHeader& header,
                    const std::vector<SignalSpec>& specs,
                    const std::vector<std::vector<double>>& physical) {
  const std::vector<std::uint8_t> bytes = write_edf(header, specs, physical);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw EdfError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw EdfError("write failed for '" + path.string() + "'");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw EdfError("cannot open '" + path.string() + "'");
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !f.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw EdfError("read failed for '" + path.string() + "'");
  }
  return bytes;
}

}  // namespace osanet::edf
