#include "osanet/synth.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "osanet/edf.hpp"
#include "osanet/pipeline.hpp"
#include "osanet/rng.hpp"

namespace osanet::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

// oahi3 draw ranges, strictly interior to the severity bands
// (0,1] / (1,5] / (5,10] / (10,inf).
constexpr double kOahiLo[cohort::kNumClasses] = {0.2, 1.5, 5.5, 10.5};
constexpr double kOahiHi[cohort::kNumClasses] = {0.9, 4.5, 9.5, 25.0};

long long integral_count(double value, const char* what) {
  const double rounded = std::round(value);
  if (!(value > 0.0) || std::abs(value - rounded) > 1e-9 * std::max(1.0, std::abs(value))) {
    throw SynthError(std::string(what) + " must be a positive integer, got " +
                     std::to_string(value));
  }
  return static_cast<long long>(rounded);
}

void validate(const SynthSpec& spec) {
  if (spec.subjects_per_class < 1) throw SynthError("subjects_per_class must be >= 1");
  if (!(spec.duration_sec > 0.0)) throw SynthError("duration_sec must be positive");
  if (!(spec.record_duration_sec > 0.0)) throw SynthError("record_duration_sec must be positive");
  if (spec.awake_head_sec < 0.0 || spec.awake_tail_sec < 0.0) {
    throw SynthError("awake margins cannot be negative");
  }
  if (spec.awake_head_sec + spec.awake_tail_sec >= spec.duration_sec) {
    throw SynthError("awake margins leave no sleep interval");
  }
  for (double r : spec.group_rate_hz) {
    if (!(r > 0.0)) throw SynthError("group sampling rates must be positive");
  }
  if (!(spec.burst_len_sec > 0.0)) throw SynthError("burst_len_sec must be positive");
  if (spec.noise_level < 0.0) throw SynthError("noise_level cannot be negative");
  for (const ClassSignature& sig : spec.signatures) {
    if (sig.burst_rate_per_min < 0.0 || sig.burst_amp < 0.0 || sig.carrier_freq_hz < 0.0) {
      throw SynthError("class signature parameters cannot be negative");
    }
    if (sig.burst_rate_per_min > 0.0 && 60.0 / sig.burst_rate_per_min < spec.burst_len_sec) {
      throw SynthError("burst rate too high: bursts would overlap");
    }
  }
}

// One burst per interval, jittered uniformly inside it. A fixed phase would
// put bursts at identical in-window offsets for a whole subject (the interval
// divides the segment length in the defaults), which a model can memorize
// instead of the class signature; the jitter leaves rate, size and carrier
// pitch as the only stable cues.
std::vector<double> draw_burst_starts(double duration, double interval, double len,
                                      SplitMix64& rng) {
  std::vector<double> starts;
  if (interval <= 0.0) return starts;
  for (double t0 = 0.0; t0 < duration; t0 += interval) {
    starts.push_back(t0 + rng.uniform(0.0, interval - len));
  }
  return starts;
}

// Hann-windowed carrier burst. `cursor` walks the sorted start list as `t`
// advances monotonically within one channel.
double burst_at(double t, const std::vector<double>& starts, std::size_t& cursor, double len,
                double amp, double carrier) {
  if (amp <= 0.0 || starts.empty()) return 0.0;
  while (cursor + 1 < starts.size() && t >= starts[cursor] + len) ++cursor;
  const double dt = t - starts[cursor];
  if (dt < 0.0 || dt >= len) return 0.0;
  const double window = 0.5 * (1.0 - std::cos(2.0 * kPi * dt / len));
  return amp * window * std::sin(2.0 * kPi * carrier * dt);
}

}  // namespace

GeneratedCohort generate_cohort(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw SynthError("cannot create '" + out_dir.string() + "': " + ec.message());

  const pipeline::ChannelGroup groups[4] = {
      pipeline::standard_group(pipeline::GroupName::ECG),
      pipeline::standard_group(pipeline::GroupName::EEG),
      pipeline::standard_group(pipeline::GroupName::EMG),
      pipeline::standard_group(pipeline::GroupName::RESP),
  };

  const long long num_records = integral_count(
      spec.duration_sec / spec.record_duration_sec, "duration / record_duration");

  // One spec row per channel, group rates expanded channel-wise.
  std::vector<edf::SignalSpec> signal_specs;
  std::vector<double> channel_rates;
  for (std::size_t g = 0; g < 4; ++g) {
    const long long spr = integral_count(spec.group_rate_hz[g] * spec.record_duration_sec,
                                         "samples per record");
    for (const std::string& label : groups[g].channel_labels) {
      edf::SignalSpec s;
      s.label = label;
      s.transducer = "synthetic";
      s.physical_dimension = "uV";
      s.physical_min = -4.0;
      s.physical_max = 4.0;
      s.digital_min = -32768;
      s.digital_max = 32767;
      s.prefiltering = "none";
      s.samples_per_record = spr;
      signal_specs.push_back(std::move(s));
      channel_rates.push_back(spec.group_rate_hz[g]);
    }
  }

  std::vector<cohort::Subject> subjects;
  std::vector<pipeline::SleepWindow> windows;

  std::size_t ordinal = 0;
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    const ClassSignature& sig = spec.signatures[c];
    const double interval = sig.burst_rate_per_min > 0.0 ? 60.0 / sig.burst_rate_per_min : 0.0;

    for (std::size_t i = 0; i < spec.subjects_per_class; ++i, ++ordinal) {
      SplitMix64 rng(derive_seed(spec.seed, ordinal));

      char name[64];
      std::snprintf(name, sizeof(name), "%s-%s-%02zu", spec.id_prefix.c_str(),
                    cohort::to_string(static_cast<cohort::SeverityLabel>(c)), i + 1);
      const std::string subject_id = name;

      const double oahi3 = rng.uniform(kOahiLo[c], kOahiHi[c]);
      // Event times are subject-global: every channel sees the same bursts.
      const std::vector<double> burst_starts =
          draw_burst_starts(spec.duration_sec, interval, spec.burst_len_sec, rng);

      std::vector<std::vector<double>> physical(signal_specs.size());
      for (std::size_t ch = 0; ch < signal_specs.size(); ++ch) {
        const double rate = channel_rates[ch];
        const double freq = spec.base_freq_hz * (1.0 + 0.1 * static_cast<double>(ch));
        // Fixed per-channel phase, identical across subjects. A per-subject
        // random phase would repeat at the same offset in every segment
        // (1 Hz base vs 10 s windows) and becomes a memorizable subject
        // fingerprint that sinks held-out accuracy.
        const double phi = 2.0 * kPi * 0.618 * static_cast<double>(ch);
        const std::size_t n =
            static_cast<std::size_t>(num_records * signal_specs[ch].samples_per_record);

        std::vector<double>& samples = physical[ch];
        samples.resize(n);
        std::size_t cursor = 0;
        for (std::size_t t = 0; t < n; ++t) {
          const double sec = static_cast<double>(t) / rate;
          double v = spec.base_amp * std::sin(2.0 * kPi * freq * sec + phi);
          v += burst_at(sec, burst_starts, cursor, spec.burst_len_sec, sig.burst_amp,
                        sig.carrier_freq_hz);
          if (spec.noise_level > 0.0) v += spec.noise_level * rng.gaussian();
          samples[t] = v;
        }
      }

      edf::EdfHeader header;
      header.version = "0";
      header.patient_id = subject_id;
      header.recording_id = "Startdate 01-JAN-2026 synthetic cohort";
      header.start = edf::DateTime{2026, 1, 1, 22, 0, 0};
      header.num_records = num_records;
      header.record_duration = spec.record_duration_sec;
      header.num_signals = static_cast<int>(signal_specs.size());

      const std::filesystem::path edf_path = out_dir / (subject_id + ".edf");
      edf::write_edf_file(edf_path, header, signal_specs, physical);

      subjects.push_back({subject_id, subject_id + ".edf", oahi3,
                          static_cast<cohort::SeverityLabel>(c)});
      windows.push_back(
          {subject_id, spec.awake_head_sec, spec.duration_sec - spec.awake_tail_sec});
    }
  }

  GeneratedCohort out{cohort::Cohort(std::move(subjects)), out_dir / "manifest.csv",
                      out_dir / "annotations.csv"};
  cohort::write_manifest(out.manifest_path, out.cohort);
  pipeline::write_annotations(out.annotations_path, windows);

  // Manifest paths are relative to the manifest itself; reload so the cohort
  // we hand back carries resolved absolute paths.
  out.cohort = cohort::load_manifest(out.manifest_path);
  return out;
}

}  // namespace osanet::synth
