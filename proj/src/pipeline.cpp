#include "osanet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace osanet::pipeline {

namespace {

constexpr char kTensorMagic[8] = {'O', 'S', 'N', 'T', 'E', 'N', 'S', '1'};

void write_u64(std::ofstream& f, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 8);
}

void write_u32(std::ofstream& f, std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint64_t read_u64(std::ifstream& f, const char* what) {
  std::uint8_t b[8];
  if (!f.read(reinterpret_cast<char*>(b), 8)) {
    throw PipelineError(std::string("tensor file truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t read_u32(std::ifstream& f, const char* what) {
  std::uint8_t b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) {
    throw PipelineError(std::string("tensor file truncated while reading ") + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

const char* to_string(GroupName name) {
  switch (name) {
    case GroupName::ECG: return "ecg";
    case GroupName::EEG: return "eeg";
    case GroupName::EMG: return "emg";
    case GroupName::RESP: return "resp";
  }
  return "?";
}

std::optional<GroupName> group_from_string(std::string_view text) {
  if (text == "ecg" || text == "ECG") return GroupName::ECG;
  if (text == "eeg" || text == "EEG") return GroupName::EEG;
  if (text == "emg" || text == "EMG") return GroupName::EMG;
  if (text == "resp" || text == "RESP") return GroupName::RESP;
  return std::nullopt;
}

ChannelGroup standard_group(GroupName name) {
  switch (name) {
    case GroupName::ECG: return {name, {"ECG1", "ECG2"}};
    case GroupName::EEG: return {name, {"C3", "C4", "A1", "A2"}};
    case GroupName::EMG: return {name, {"EMG1", "EMG2", "EMG3"}};
    case GroupName::RESP: return {name, {"AIRFLOW", "THORACIC", "ABDOMINAL"}};
  }
  throw PipelineError("unknown channel group");
}

std::map<std::string, SleepWindow> load_annotations(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError("cannot open annotations '" + path.string() + "'");
  std::string line;
  if (!std::getline(f, line) ||
      (line != "subject_id,sleep_onset_sec,sleep_offset_sec" &&
       line != "subject_id,sleep_onset_sec,sleep_offset_sec\r")) {
    throw PipelineError("annotations header must be 'subject_id,sleep_onset_sec,sleep_offset_sec'");
  }
  std::map<std::string, SleepWindow> out;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw PipelineError("annotations line " + std::to_string(line_no) + ": expected 3 fields");
    }
    SleepWindow w;
    w.subject_id = line.substr(0, c1);
    try {
      w.onset_sec = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      w.offset_sec = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw PipelineError("annotations line " + std::to_string(line_no) + ": bad number");
    }
    if (!(w.onset_sec >= 0.0) || !(w.offset_sec > w.onset_sec)) {
      throw PipelineError("annotations line " + std::to_string(line_no) +
                          ": need 0 <= onset < offset");
    }
    out[w.subject_id] = w;
  }
  return out;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<SleepWindow>& windows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PipelineError("cannot open '" + path.string() + "' for writing");
  f << "subject_id,sleep_onset_sec,sleep_offset_sec\n";
  for (const auto& w : windows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g", w.onset_sec, w.offset_sec);
    f << w.subject_id << ',' << buf << '\n';
  }
  if (!f) throw PipelineError("write failed for '" + path.string() + "'");
}

edf::SignalTrace trim_awake(const edf::SignalTrace& trace, const SleepWindow& window) {
  if (!(window.onset_sec >= 0.0) || !(window.offset_sec > 0.0)) {
    throw PipelineError("sleep window must satisfy 0 <= onset < offset");
  }
  const std::size_t begin =
      static_cast<std::size_t>(std::floor(window.onset_sec * trace.sampling_rate));
  const std::size_t end =
      static_cast<std::size_t>(std::floor(window.offset_sec * trace.sampling_rate));
  if (begin >= end) {
    throw PipelineError("sleep window for '" + window.subject_id + "' is empty");
  }
  if (end > trace.samples.size()) {
    throw PipelineError("sleep window for '" + window.subject_id +
                        "' extends beyond the recording (" + std::to_string(end) + " > " +
                        std::to_string(trace.samples.size()) + " samples)");
  }
  edf::SignalTrace out;
  out.label = trace.label;
  out.sampling_rate = trace.sampling_rate;
  out.samples.assign(trace.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     trace.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::vector<std::vector<double>> segment(std::span<const double> samples, std::size_t seq_len) {
  if (seq_len < 1) throw PipelineError("seq_len must be >= 1");
  const std::size_t count = samples.size() / seq_len;
  std::vector<std::vector<double>> windows;
  windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    windows.emplace_back(samples.begin() + static_cast<std::ptrdiff_t>(i * seq_len),
                         samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * seq_len));
  }
  return windows;
}

std::vector<double> normalize(std::span<const double> values) {
  if (values.empty()) throw PipelineError("cannot normalize an empty sequence");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);

  std::vector<double> out(values.size());
  if (sd < 1e-12) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

SegmentTensor assemble(const ChannelGroup& group, const std::vector<SubjectSegments>& subjects) {
  if (group.channel_labels.empty()) throw PipelineError("channel group has no channels");

  SegmentTensor tensor;
  tensor.channels = group.channel_labels.size();

  for (const auto& subj : subjects) {
    if (subj.channels.size() != group.channel_labels.size()) {
      throw PipelineError("subject '" + subj.subject_id + "': " +
                          std::to_string(subj.channels.size()) + " channels, group '" +
                          to_string(group.name) + "' defines " +
                          std::to_string(group.channel_labels.size()));
    }
    const double rate = subj.channels.front().sampling_rate;
    const std::size_t windows = subj.channels.front().windows.size();
    for (std::size_t c = 0; c < subj.channels.size(); ++c) {
      const auto& ch = subj.channels[c];
      if (ch.sampling_rate != rate) {
        throw PipelineError("subject '" + subj.subject_id + "': sampling rate mismatch within group (" +
                            std::to_string(ch.sampling_rate) + " vs " + std::to_string(rate) + " Hz)");
      }
      if (ch.windows.size() != windows) {
        throw PipelineError("subject '" + subj.subject_id + "': window count mismatch across channels (" +
                            std::to_string(ch.windows.size()) + " vs " + std::to_string(windows) + ")");
      }
    }
    if (windows == 0) continue;

    const std::size_t seq_len = subj.channels.front().windows.front().size();
    if (tensor.seq_len == 0) tensor.seq_len = seq_len;
    if (seq_len != tensor.seq_len) {
      throw PipelineError("subject '" + subj.subject_id + "': window length " +
                          std::to_string(seq_len) + " differs from tensor seq_len " +
                          std::to_string(tensor.seq_len));
    }
    for (const auto& ch : subj.channels) {
      for (const auto& w : ch.windows) {
        if (w.size() != seq_len) {
          throw PipelineError("subject '" + subj.subject_id + "': ragged window length");
        }
      }
    }

    const std::uint32_t subj_idx = static_cast<std::uint32_t>(tensor.subject_table.size());
    tensor.subject_table.push_back(subj.subject_id);

    for (std::size_t w = 0; w < windows; ++w) {
      for (std::size_t t = 0; t < seq_len; ++t) {
        for (std::size_t c = 0; c < tensor.channels; ++c) {
          tensor.values.push_back(static_cast<float>(subj.channels[c].windows[w][t]));
        }
      }
      tensor.labels.push_back(static_cast<std::uint8_t>(subj.label));
      tensor.subject_index.push_back(subj_idx);
    }
  }

  if (tensor.labels.empty()) {
    throw PipelineError("assembly produced an empty tensor (no subject had a full window)");
  }
  return tensor;
}

void save_tensor(const std::filesystem::path& path, const SegmentTensor& tensor) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PipelineError("cannot open '" + path.string() + "' for writing");
  f.write(kTensorMagic, sizeof(kTensorMagic));
  write_u64(f, tensor.size());
  write_u64(f, tensor.seq_len);
  write_u64(f, tensor.channels);
  static_assert(sizeof(float) == 4);
  f.write(reinterpret_cast<const char*>(tensor.values.data()),
          static_cast<std::streamsize>(tensor.values.size() * sizeof(float)));
  f.write(reinterpret_cast<const char*>(tensor.labels.data()),
          static_cast<std::streamsize>(tensor.labels.size()));
  write_u64(f, tensor.subject_table.size());
  for (const auto& id : tensor.subject_table) {
    write_u32(f, static_cast<std::uint32_t>(id.size()));
    f.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (std::uint32_t idx : tensor.subject_index) write_u32(f, idx);
  if (!f) throw PipelineError("write failed for '" + path.string() + "'");
}

SegmentTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PipelineError("cannot open tensor file '" + path.string() + "'");
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0) {
    throw PipelineError("'" + path.string() + "' is not a tensor container (bad magic)");
  }
  SegmentTensor tensor;
  const std::uint64_t n = read_u64(f, "N");
  tensor.seq_len = static_cast<std::size_t>(read_u64(f, "seq_len"));
  tensor.channels = static_cast<std::size_t>(read_u64(f, "channels"));
  if (n == 0 || tensor.seq_len == 0 || tensor.channels == 0) {
    throw PipelineError("tensor dims must all be >= 1");
  }
  tensor.values.resize(static_cast<std::size_t>(n) * tensor.seq_len * tensor.channels);
  if (!f.read(reinterpret_cast<char*>(tensor.values.data()),
              static_cast<std::streamsize>(tensor.values.size() * sizeof(float)))) {
    throw PipelineError("tensor file truncated in values block");
  }
  tensor.labels.resize(static_cast<std::size_t>(n));
  if (!f.read(reinterpret_cast<char*>(tensor.labels.data()),
              static_cast<std::streamsize>(n))) {
    throw PipelineError("tensor file truncated in labels block");
  }
  for (std::uint8_t l : tensor.labels) {
    if (l >= cohort::kNumClasses) throw PipelineError("label byte out of range");
  }
  const std::uint64_t table = read_u64(f, "subject table size");
  tensor.subject_table.resize(static_cast<std::size_t>(table));
  for (auto& id : tensor.subject_table) {
    const std::uint32_t len = read_u32(f, "subject id length");
    id.resize(len);
    if (len > 0 && !f.read(id.data(), len)) {
      throw PipelineError("tensor file truncated in subject table");
    }
  }
  tensor.subject_index.resize(static_cast<std::size_t>(n));
  for (auto& idx : tensor.subject_index) {
    idx = read_u32(f, "subject index");
    if (idx >= tensor.subject_table.size()) {
      throw PipelineError("subject index out of range");
    }
  }
  return tensor;
}

SegmentTensor build_tensor(const cohort::Cohort& cohort, const ChannelGroup& group,
                           const std::map<std::string, SleepWindow>& annotations,
                           double seq_seconds, std::vector<std::string>* warnings) {
  if (!(seq_seconds > 0.0)) throw PipelineError("seq_seconds must be > 0");

  std::vector<SubjectSegments> subjects;
  subjects.reserve(cohort.size());

  for (const auto& subj : cohort.subjects()) {
    try {
      const std::vector<std::uint8_t> raw = edf::read_file(subj.edf_path);
      const auto [header, specs] = edf::parse_header(raw);

      SubjectSegments seg;
      seg.subject_id = subj.subject_id;
      seg.label = subj.label;

      const auto ann = annotations.find(subj.subject_id);
      if (ann == annotations.end() && warnings) {
        warnings->push_back("subject '" + subj.subject_id +
                            "': no sleep window, using the full recording");
      }

      for (const auto& label : group.channel_labels) {
        std::size_t index = specs.size();
        for (std::size_t i = 0; i < specs.size(); ++i) {
          if (specs[i].label == label) {
            index = i;
            break;
          }
        }
        if (index == specs.size()) {
          throw PipelineError("channel '" + label + "' not present in EDF");
        }
        edf::SignalTrace trace = edf::read_signal(raw, header, specs, index);
        if (ann != annotations.end()) trace = trim_awake(trace, ann->second);

        const double exact = trace.sampling_rate * seq_seconds;
        const std::size_t seq_len = static_cast<std::size_t>(std::llround(exact));
        if (seq_len < 1 || std::abs(exact - static_cast<double>(seq_len)) > 1e-6) {
          throw PipelineError("seq_seconds " + std::to_string(seq_seconds) +
                              " does not give a whole number of samples at " +
                              std::to_string(trace.sampling_rate) + " Hz");
        }

        ChannelWindows ch;
        ch.label = label;
        ch.sampling_rate = trace.sampling_rate;
        ch.windows = segment(normalize(trace.samples), seq_len);
        if (ch.windows.empty() && warnings) {
          warnings->push_back("subject '" + subj.subject_id + "', channel '" + label +
                              "': trace shorter than one window");
        }
        seg.channels.push_back(std::move(ch));
      }
      subjects.push_back(std::move(seg));
    } catch (const PipelineError& e) {
      throw PipelineError("subject '" + subj.subject_id + "': " + e.what());
    } catch (const edf::EdfError& e) {
      throw PipelineError("subject '" + subj.subject_id + "': " + e.what());
    }
  }

  return assemble(group, subjects);
}

}  // namespace osanet::pipeline
