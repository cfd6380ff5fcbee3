#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "osanet/cohort.hpp"
#include "osanet/edf.hpp"
#include "osanet/pipeline.hpp"
#include "osanet/synth.hpp"
#include "scratch.hpp"

using namespace osanet;
using synth::SynthSpec;

namespace {

SynthSpec tiny_spec(std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.subjects_per_class = 2;
  spec.duration_sec = 30.0;
  spec.awake_head_sec = 5.0;
  spec.awake_tail_sec = 5.0;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("a generated cohort is complete and well-labeled") {
  test_support::Scratch dir("synth-basic");
  const auto out = synth::generate_cohort(tiny_spec(), dir.path);

  CHECK(out.manifest_path == dir / "manifest.csv");
  CHECK(out.annotations_path == dir / "annotations.csv");
  CHECK(std::filesystem::exists(out.manifest_path));
  CHECK(std::filesystem::exists(out.annotations_path));

  REQUIRE(out.cohort.size() == 8);
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    CHECK(out.cohort.per_class_counts()[c] == 2);
  }

  const double lo[] = {0.0, 1.0, 5.0, 10.0};
  const double hi[] = {1.0, 5.0, 10.0, 1e9};
  for (const auto& s : out.cohort.subjects()) {
    const auto c = static_cast<std::size_t>(s.label);
    CHECK(s.oahi3 > lo[c]);
    CHECK(s.oahi3 <= hi[c]);
    CHECK(cohort::label_from_oahi3(s.oahi3) == s.label);
    CHECK(std::filesystem::exists(s.edf_path));
  }

  // subject ids follow prefix-CLASS-NN
  CHECK(out.cohort.subjects()[0].subject_id == "synth-NL-01");
  CHECK(out.cohort.subjects()[7].subject_id == "synth-SV-02");

  // two subjects of one class are distinct draws
  CHECK(out.cohort.subjects()[0].oahi3 != out.cohort.subjects()[1].oahi3);

  SUBCASE("every EDF carries the full 12-channel montage") {
    const auto raw = edf::read_file(out.cohort.subjects()[0].edf_path);
    const auto [header, specs] = edf::parse_header(raw);
    CHECK(header.num_signals == 12);
    CHECK(header.num_records == 30);
    CHECK(header.record_duration == 1.0);
    std::vector<std::string> labels;
    for (const auto& sp : specs) labels.push_back(sp.label);
    CHECK(labels ==
          std::vector<std::string>{"ECG1", "ECG2", "C3", "C4", "A1", "A2", "EMG1", "EMG2",
                                   "EMG3", "AIRFLOW", "THORACIC", "ABDOMINAL"});
  }

  SUBCASE("annotations carry the awake margins") {
    const auto ann = pipeline::load_annotations(out.annotations_path);
    REQUIRE(ann.size() == 8);
    for (const auto& s : out.cohort.subjects()) {
      REQUIRE(ann.count(s.subject_id) == 1);
      CHECK(ann.at(s.subject_id).onset_sec == 5.0);
      CHECK(ann.at(s.subject_id).offset_sec == 25.0);
    }
  }
}

TEST_CASE("generation is byte-deterministic in the seed") {
  test_support::Scratch dir("synth-det");
  const auto a = synth::generate_cohort(tiny_spec(7), dir / "a");
  const auto b = synth::generate_cohort(tiny_spec(7), dir / "b");
  const auto c = synth::generate_cohort(tiny_spec(8), dir / "c");

  const auto bytes = [](const std::filesystem::path& p) { return edf::read_file(p); };

  CHECK(bytes(dir / "a" / "manifest.csv") == bytes(dir / "b" / "manifest.csv"));
  CHECK(bytes(dir / "a" / "annotations.csv") == bytes(dir / "b" / "annotations.csv"));
  for (const char* name : {"synth-NL-01.edf", "synth-MOD-02.edf", "synth-SV-01.edf"}) {
    CHECK(bytes(dir / "a" / name) == bytes(dir / "b" / name));
  }
  CHECK(bytes(dir / "a" / "synth-NL-01.edf") != bytes(dir / "c" / "synth-NL-01.edf"));

  CHECK(a.cohort.subjects()[0].oahi3 == b.cohort.subjects()[0].oahi3);
  CHECK(a.cohort.subjects()[0].oahi3 != c.cohort.subjects()[0].oahi3);
}

TEST_CASE("with noise and bursts off the signal is the pure base rhythm") {
  test_support::Scratch dir("synth-clean");
  SynthSpec spec = tiny_spec();
  spec.noise_level = 0.0;
  for (auto& sig : spec.signatures) sig = {0.0, 0.0, 0.0};

  const auto out = synth::generate_cohort(spec, dir.path);
  const auto raw = edf::read_file(out.cohort.subjects()[3].edf_path);
  const auto [header, specs] = edf::parse_header(raw);

  constexpr double kPi = 3.14159265358979323846;
  const double step = (specs[0].physical_max - specs[0].physical_min) / 65535.0;

  for (std::size_t ch : {std::size_t(0), std::size_t(2), std::size_t(11)}) {
    const auto trace = edf::read_signal(raw, header, specs, ch);
    REQUIRE(trace.samples.size() == 30 * 64);
    const double freq = 1.0 * (1.0 + 0.1 * static_cast<double>(ch));
    const double phi = 2.0 * kPi * 0.618 * static_cast<double>(ch);
    for (std::size_t t = 0; t < trace.samples.size(); ++t) {
      const double sec = static_cast<double>(t) / 64.0;
      const double want = std::sin(2.0 * kPi * freq * sec + phi);
      CHECK(std::abs(trace.samples[t] - want) <= step / 2 + 1e-9);
    }
  }
}

TEST_CASE("per-group sampling rates land in the signal headers") {
  test_support::Scratch dir("synth-rates");
  SynthSpec spec = tiny_spec();
  spec.group_rate_hz = {64.0, 32.0, 16.0, 8.0};

  const auto out = synth::generate_cohort(spec, dir.path);
  const auto raw = edf::read_file(out.cohort.subjects()[0].edf_path);
  const auto [header, specs] = edf::parse_header(raw);

  const long long want_spr[] = {64, 64, 32, 32, 32, 32, 16, 16, 16, 8, 8, 8};
  REQUIRE(specs.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(specs[i].samples_per_record == want_spr[i]);
    CHECK(specs[i].sampling_rate(header.record_duration) ==
          static_cast<double>(want_spr[i]));
  }
}

TEST_CASE("invalid specs are rejected up front") {
  test_support::Scratch dir("synth-bad");
  const auto expect_throw = [&](SynthSpec spec, const char* needle) {
    CHECK_THROWS_WITH_AS(synth::generate_cohort(spec, dir / "x"),
                         doctest::Contains(needle), synth::SynthError);
  };

  SynthSpec s = tiny_spec();
  s.subjects_per_class = 0;
  expect_throw(s, "subjects_per_class");

  s = tiny_spec();
  s.duration_sec = 0.0;
  expect_throw(s, "duration_sec");

  s = tiny_spec();
  s.awake_head_sec = 20.0;
  s.awake_tail_sec = 10.0;
  expect_throw(s, "no sleep interval");

  s = tiny_spec();
  s.noise_level = -0.1;
  expect_throw(s, "noise_level");

  s = tiny_spec();
  s.signatures[3].burst_rate_per_min = 120.0;  // interval 0.5 s < burst length
  expect_throw(s, "bursts would overlap");

  s = tiny_spec();
  s.duration_sec = 10.5;  // not a whole number of 1 s records
  expect_throw(s, "positive integer");

  s = tiny_spec();
  s.group_rate_hz[1] = 0.3;  // fractional samples per record
  expect_throw(s, "positive integer");

  s = tiny_spec();
  s.signatures[0].burst_amp = -1.0;
  expect_throw(s, "cannot be negative");
}

TEST_CASE("the generated cohort feeds the pipeline directly") {
  test_support::Scratch dir("synth-pipe");
  const auto out = synth::generate_cohort(tiny_spec(), dir.path);
  const auto ann = pipeline::load_annotations(out.annotations_path);

  const auto tensor = pipeline::build_tensor(
      out.cohort, pipeline::standard_group(pipeline::GroupName::ECG), ann, 5.0, nullptr);
  // 20 sleeping seconds per subject, 5 s windows -> 4 rows each
  CHECK(tensor.size() == 32);
  CHECK(tensor.seq_len == 320);
  CHECK(tensor.channels == 2);
  CHECK(tensor.subject_table.size() == 8);
}

}  // TEST_SUITE
