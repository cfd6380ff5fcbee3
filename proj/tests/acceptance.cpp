// Acceptance gate: every release-blocking property gets one PASS/FAIL line,
// and the exit code is the number of failures. Tolerances live next to the
// checks they guard.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "osanet/cohort.hpp"
#include "osanet/edf.hpp"
#include "osanet/metrics.hpp"
#include "osanet/model.hpp"
#include "osanet/pipeline.hpp"
#include "osanet/rng.hpp"
#include "osanet/synth.hpp"
#include "osanet/training.hpp"
#include "scratch.hpp"

using namespace osanet;

namespace {

class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& detail) {
  if (!ok) throw Failure(detail);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---- reference confusion matrices (single-night hold-out + one train set) --

metrics::ConfusionMatrix make_cm(const std::array<std::array<std::uint64_t, 4>, 4>& rows) {
  metrics::ConfusionMatrix cm;
  cm.counts = rows;
  return cm;
}

const metrics::ConfusionMatrix kEcgTest = make_cm({{{1000, 0, 3, 5},
                                                    {10, 1032, 6, 8},
                                                    {1, 0, 1022, 3},
                                                    {3, 1, 2, 1000}}});
const metrics::ConfusionMatrix kEegTest = make_cm({{{976, 12, 4, 26},
                                                    {7, 1014, 11, 9},
                                                    {28, 30, 945, 28},
                                                    {28, 21, 16, 941}}});
const metrics::ConfusionMatrix kEmgTest = make_cm({{{731, 14, 9, 31},
                                                    {11, 795, 5, 17},
                                                    {9, 7, 775, 7},
                                                    {17, 7, 0, 765}}});
const metrics::ConfusionMatrix kRespTest = make_cm({{{461, 10, 14, 19},
                                                     {10, 478, 14, 26},
                                                     {20, 7, 468, 14},
                                                     {13, 11, 6, 477}}});
const metrics::ConfusionMatrix kEcgTrain = make_cm({{{3321, 0, 1, 2},
                                                     {0, 3511, 5, 2},
                                                     {1, 5, 3378, 0},
                                                     {0, 2, 0, 3340}}});

// 1. The ECG hold-out scores derived from the reference confusion matrix.
void check_ecg_reference() {
  const auto rep = metrics::report(kEcgTest);
  const auto close = [&](double got, double want, const char* name) {
    expect(std::abs(got - want) <= 5e-5,
           std::string(name) + " = " + fmt(got) + ", reference " + fmt(want));
  };
  close(rep.accuracy, 0.9897, "accuracy");
  close(rep.per_class[0].precision, 0.9862, "NL precision");
  close(rep.per_class[0].recall, 0.9921, "NL recall");
  close(rep.per_class[1].precision, 0.9990, "MIN precision");
}

// 2. Every channel group's accuracy recomputed from raw counts.
void check_all_channel_accuracies() {
  struct Case {
    const char* name;
    const metrics::ConfusionMatrix* cm;
    double published;
  };
  const Case cases[] = {
      {"ECG test", &kEcgTest, 0.9897},   {"EEG test", &kEegTest, 0.9463},
      {"EMG test", &kEmgTest, 0.9581},   {"RESP test", &kRespTest, 0.9199},
      {"ECG train", &kEcgTrain, 0.9987},
  };
  for (const Case& c : cases) {
    const double acc = metrics::report(*c.cm).accuracy;
    expect(std::abs(acc - c.published) <= 0.002,
           std::string(c.name) + " accuracy " + fmt(acc) + " vs " + fmt(c.published));
  }
}

// 3. The full-scale geometry: an 8.24 h x 256 Hz trace segments into 494
// one-minute windows, and the full-size network accepts them.
void check_full_scale_segmentation() {
  constexpr std::size_t kRate = 256;
  constexpr std::size_t kSeconds = 29664;  // 8.24 h
  constexpr std::size_t kSeqLen = 60 * kRate;

  std::vector<double> trace(kSeconds * kRate);
  expect(trace.size() == 7593984, "trace holds " + std::to_string(trace.size()) + " samples");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    trace[i] = static_cast<double>(i % 997) / 997.0;
  }

  const auto windows = pipeline::segment(trace, kSeqLen);
  expect(windows.size() == 494, "got " + std::to_string(windows.size()) + " windows, want 494");
  for (const auto& w : windows) {
    expect(w.size() == kSeqLen, "ragged window of " + std::to_string(w.size()));
  }
  const std::size_t remainder = trace.size() - windows.size() * kSeqLen;
  expect(remainder == 6144 && remainder < kSeqLen,
         "remainder " + std::to_string(remainder));

  const auto model = nn::Model::build(kSeqLen, 2, nn::full_architecture(), 1);
  const std::vector<std::size_t> want_chain = {7676, 3834, 1913, 952, 467, 90};
  expect(model.chain_lengths() == want_chain, "conv/pool chain mismatch");
  expect(model.flatten_width() == 16560,
         "flatten width " + std::to_string(model.flatten_width()));

  nn::Tensor3f x(1, kSeqLen, 2);
  for (std::size_t t = 0; t < kSeqLen; ++t) {
    x.at(0, t, 0) = static_cast<float>(windows[0][t]);
    x.at(0, t, 1) = static_cast<float>(windows[1][t]);
  }
  const auto logits = model.forward(x);
  expect(logits.rows == 1 && logits.cols == 4, "unexpected logit shape");
  for (float v : logits.v) expect(std::isfinite(v), "non-finite logit");
}

// 4. Analytic gradients vs central finite differences, many random shapes.
void check_gradients() {
  SplitMix64 rng(2024);
  double worst_conv = 0.0, worst_pool = 0.0, worst_dense = 0.0, worst_head = 0.0;
  for (int i = 0; i < 24; ++i) worst_conv = std::max(worst_conv, gradcheck::check_conv(rng));
  for (int i = 0; i < 24; ++i) worst_pool = std::max(worst_pool, gradcheck::check_pool(rng));
  for (int i = 0; i < 12; ++i) {
    worst_dense = std::max(worst_dense, gradcheck::check_dense(rng, true));
    worst_dense = std::max(worst_dense, gradcheck::check_dense(rng, false));
  }
  for (int i = 0; i < 20; ++i) {
    worst_head = std::max(worst_head, gradcheck::check_dropout_eval(rng));
    worst_head = std::max(worst_head, gradcheck::check_softmax(rng));
  }
  expect(worst_conv < 1e-4, "conv worst rel error " + fmt(worst_conv));
  expect(worst_pool < 1e-4, "pool worst rel error " + fmt(worst_pool));
  expect(worst_dense < 1e-6, "dense worst rel error " + std::to_string(worst_dense));
  expect(worst_head < 1e-6,
         "dropout/softmax worst rel error " + std::to_string(worst_head));
}

// Artifacts from the end-to-end run, shared with the later criteria.
struct E2eArtifacts {
  test_support::Scratch dir{"acceptance-e2e"};
  pipeline::SegmentTensor train, val, test;
};

std::optional<E2eArtifacts> g_e2e;
std::string g_e2e_error = "end-to-end run has not executed";

cohort::Cohort subset_cohort(const cohort::Cohort& all, const std::vector<std::string>& ids) {
  const std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<cohort::Subject> picked;
  for (const auto& s : all.subjects()) {
    if (wanted.count(s.subject_id)) picked.push_back(s);
  }
  return cohort::Cohort(std::move(picked));
}

// 5. The whole pipeline on the stock synthetic cohort: train accuracy 0.99+
// inside 500 iterations, held-out subjects at 0.95+, loss moving down.
void check_end_to_end() {
  g_e2e.emplace();
  E2eArtifacts& art = *g_e2e;

  const synth::SynthSpec spec;  // stock cohort: 8 subjects per class, 20 min
  const auto gen = synth::generate_cohort(spec, art.dir / "cohort");
  const auto ann = pipeline::load_annotations(gen.annotations_path);
  const auto plan = train::stratified_split(gen.cohort, 1);

  const auto group = pipeline::standard_group(pipeline::GroupName::ECG);
  constexpr double kSeqSeconds = 10.0;
  art.train = pipeline::build_tensor(subset_cohort(gen.cohort, plan.train_subjects), group,
                                     ann, kSeqSeconds);
  art.val = pipeline::build_tensor(subset_cohort(gen.cohort, plan.val_subjects), group, ann,
                                   kSeqSeconds);
  art.test = pipeline::build_tensor(subset_cohort(gen.cohort, plan.test_subjects), group, ann,
                                    kSeqSeconds);

  train::TrainConfig tc;
  tc.iterations = 500;
  tc.batch_size = 32;
  tc.learning_rate = 1e-3;
  tc.eval_every = 100;
  tc.seed = 1;

  auto model = nn::Model::build(art.train.seq_len, art.train.channels,
                                nn::compact_architecture(), derive_seed(tc.seed, 0));
  const auto result = train::train(std::move(model), art.train, art.val, tc);
  expect(!result.diverged_at.has_value(),
         "training diverged at iteration " +
             std::to_string(result.diverged_at.value_or(0)));

  double best_train_acc = 0.0;
  for (const auto& p : result.curve.points) best_train_acc = std::max(best_train_acc, p.train_acc);
  expect(best_train_acc >= 0.99,
         "train accuracy peaked at " + fmt(best_train_acc) + " within 500 iterations");

  const auto& first = result.curve.points.front();
  const auto& last = result.curve.points.back();
  expect(last.train_loss < first.train_loss,
         "train loss " + fmt(first.train_loss) + " -> " + fmt(last.train_loss));

  const auto held_out = train::evaluate(result.model, art.test);
  expect(held_out.accuracy >= 0.95, "held-out accuracy " + fmt(held_out.accuracy));
}

// 6. Split invariants across 100 seeds plus subject-disjoint tensors.
void check_split_invariants() {
  const double oahi[] = {0.5, 3.0, 7.5, 20.0};
  std::vector<cohort::Subject> subjects;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < 8; ++i) {
      cohort::Subject s;
      s.subject_id = "inv-" + std::to_string(c) + "-" + std::to_string(i);
      s.edf_path = "unused.edf";
      s.oahi3 = oahi[c];
      s.label = static_cast<cohort::SeverityLabel>(c);
      subjects.push_back(std::move(s));
    }
  }
  const cohort::Cohort cohort(std::move(subjects));
  std::set<std::string> all_ids;
  for (const auto& s : cohort.subjects()) all_ids.insert(s.subject_id);

  const auto label_of = [&](const std::string& id) {
    for (const auto& s : cohort.subjects()) {
      if (s.subject_id == id) return static_cast<std::size_t>(s.label);
    }
    throw Failure("split invented subject '" + id + "'");
  };

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto plan = train::stratified_split(cohort, seed);
    const std::string tag = " (seed " + std::to_string(seed) + ")";
    expect(plan.test_subjects.size() == 8 && plan.train_subjects.size() == 18 &&
               plan.val_subjects.size() == 6,
           "bucket sizes off" + tag);

    std::set<std::string> seen;
    std::array<std::array<std::size_t, 4>, 3> per_class{};
    const std::vector<std::string>* buckets[3] = {&plan.test_subjects, &plan.train_subjects,
                                                  &plan.val_subjects};
    for (std::size_t b = 0; b < 3; ++b) {
      for (const auto& id : *buckets[b]) {
        expect(seen.insert(id).second, "subject '" + id + "' in two buckets" + tag);
        ++per_class[b][label_of(id)];
      }
    }
    expect(seen == all_ids, "buckets do not cover the cohort" + tag);

    std::size_t fives = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      expect(per_class[0][c] == 2, "test bucket not 2 per class" + tag);
      expect(per_class[1][c] >= 4 && per_class[1][c] <= 5 &&
                 per_class[1][c] + per_class[2][c] == 6,
             "train/val class ratio off" + tag);
      if (per_class[1][c] == 5) ++fives;
    }
    expect(fives == 2, "expected exactly two 5-subject train classes" + tag);
  }

  // the tensors of the end-to-end run keep subjects apart as well
  expect(g_e2e.has_value(), g_e2e_error);
  const auto overlap = [](const pipeline::SegmentTensor& a, const pipeline::SegmentTensor& b) {
    const std::set<std::string> ids(a.subject_table.begin(), a.subject_table.end());
    for (const auto& id : b.subject_table) {
      if (ids.count(id)) return id;
    }
    return std::string();
  };
  expect(overlap(g_e2e->train, g_e2e->val).empty(), "train/val tensors share a subject");
  expect(overlap(g_e2e->train, g_e2e->test).empty(), "train/test tensors share a subject");
  expect(overlap(g_e2e->val, g_e2e->test).empty(), "val/test tensors share a subject");
}

// 7. EDF writer/parser round trip, quantization bound, malformed rejection.
void check_edf_round_trip() {
  edf::EdfHeader h;
  h.patient_id = "acceptance";
  h.recording_id = "Startdate 02-JAN-2026";
  h.start = {2026, 1, 2, 23, 0, 0};
  h.num_records = 3;
  h.record_duration = 1.0;
  h.num_signals = 2;

  edf::SignalSpec a;
  a.label = "ECG1";
  a.transducer = "electrode";
  a.physical_dimension = "uV";
  a.physical_min = -2.5;
  a.physical_max = 2.5;
  a.digital_min = -32768;
  a.digital_max = 32767;
  a.prefiltering = "none";
  a.samples_per_record = 4;
  edf::SignalSpec b = a;
  b.label = "AIRFLOW";
  b.physical_min = -1.0;
  b.physical_max = 1.0;
  b.samples_per_record = 2;

  SplitMix64 rng(77);
  std::vector<std::vector<double>> physical(2);
  for (int i = 0; i < 12; ++i) physical[0].push_back(rng.uniform(-2.4, 2.4));
  for (int i = 0; i < 6; ++i) physical[1].push_back(rng.uniform(-0.9, 0.9));

  const auto bytes = edf::write_edf(h, {a, b}, physical);
  const auto [h2, specs] = edf::parse_header(bytes);
  expect(h2.patient_id == h.patient_id && h2.num_records == 3 && h2.num_signals == 2 &&
             h2.record_duration == 1.0 && h2.start.year == 2026,
         "header fields drifted through the round trip");
  expect(specs.size() == 2 && specs[0] == a && specs[1] == b, "signal specs drifted");

  for (std::size_t s = 0; s < 2; ++s) {
    const auto trace = edf::read_signal(bytes, h2, specs, s);
    expect(trace.samples.size() == physical[s].size(), "sample count drifted");
    const double step = (specs[s].physical_max - specs[s].physical_min) /
                        static_cast<double>(specs[s].digital_max - specs[s].digital_min);
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
      expect(std::abs(trace.samples[i] - physical[s][i]) <= step,
             "sample " + std::to_string(i) + " off by more than one quantization step");
    }
  }

  // a second write of the parsed content is byte-identical
  std::vector<std::vector<double>> parsed(2);
  for (std::size_t s = 0; s < 2; ++s) {
    parsed[s] = edf::read_signal(bytes, h2, specs, s).samples;
  }
  expect(edf::write_edf(h2, specs, parsed) == bytes, "rewrite is not byte-identical");

  const auto rejects = [](std::vector<std::uint8_t> damaged) {
    try {
      edf::parse_header(damaged);
      return false;
    } catch (const edf::EdfError&) {
      return true;
    }
  };
  const auto patch = [&](std::size_t at, const std::string& text, std::size_t width) {
    std::vector<std::uint8_t> copy = bytes;
    for (std::size_t i = 0; i < width; ++i) {
      copy[at + i] = i < text.size() ? static_cast<std::uint8_t>(text[i])
                                     : static_cast<std::uint8_t>(' ');
    }
    return copy;
  };

  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 100);
  expect(rejects(truncated), "truncated header was accepted");
  expect(rejects(patch(184, "999", 8)), "inconsistent header_bytes was accepted");
  expect(rejects(patch(252, "0", 4)), "zero num_signals was accepted");
  expect(rejects(patch(244, "0", 8)), "zero record_duration was accepted");
  expect(rejects(patch(688, "0", 8)), "zero samples_per_record was accepted");
}

// 8. Bit-level determinism: identical seeds give identical curves and weights.
void check_training_determinism() {
  expect(g_e2e.has_value(), g_e2e_error);

  train::TrainConfig tc;
  tc.iterations = 100;
  tc.batch_size = 32;
  tc.learning_rate = 1e-3;
  tc.eval_every = 50;
  tc.seed = 7;

  const auto run = [&] {
    auto model = nn::Model::build(g_e2e->train.seq_len, g_e2e->train.channels,
                                  nn::compact_architecture(), derive_seed(tc.seed, 0));
    return train::train(std::move(model), g_e2e->train, g_e2e->val, tc);
  };
  const auto a = run();
  const auto b = run();

  expect(train::curve_to_csv(a.curve) == train::curve_to_csv(b.curve),
         "curve CSVs differ between identical runs");

  const auto pa = a.model.parameters();
  const auto pb = b.model.parameters();
  expect(pa.size() == pb.size(), "parameter group counts differ");
  for (std::size_t g = 0; g < pa.size(); ++g) {
    expect(pa[g].size() == pb[g].size() &&
               std::memcmp(pa[g].data(), pb[g].data(), pa[g].size() * sizeof(float)) == 0,
           "weights differ in parameter group " + std::to_string(g));
  }
}

// 9. The severity bands partition (0, 100]: every value lands in exactly one.
void check_label_partition() {
  using cohort::SeverityLabel;
  expect(cohort::label_from_oahi3(0.0) == SeverityLabel::NL, "0 must map to NL");
  expect(cohort::label_from_oahi3(1.0) == SeverityLabel::NL, "1 must map to NL");
  expect(cohort::label_from_oahi3(std::nextafter(1.0, 2.0)) == SeverityLabel::MIN,
         "just above 1 must map to MIN");
  expect(cohort::label_from_oahi3(5.0) == SeverityLabel::MIN, "5 must map to MIN");
  expect(cohort::label_from_oahi3(std::nextafter(5.0, 6.0)) == SeverityLabel::MOD,
         "just above 5 must map to MOD");
  expect(cohort::label_from_oahi3(10.0) == SeverityLabel::MOD, "10 must map to MOD");
  expect(cohort::label_from_oahi3(std::nextafter(10.0, 11.0)) == SeverityLabel::SV,
         "just above 10 must map to SV");

  SplitMix64 rng(909);
  std::vector<double> values(100000);
  for (double& v : values) v = rng.uniform(0.0, 100.0);

  for (double v : values) {
    const auto label = cohort::label_from_oahi3(v);
    int hits = 0;
    if (v <= 1.0) {
      ++hits;
      expect(label == SeverityLabel::NL, "band NL missed " + fmt(v));
    }
    if (v > 1.0 && v <= 5.0) {
      ++hits;
      expect(label == SeverityLabel::MIN, "band MIN missed " + fmt(v));
    }
    if (v > 5.0 && v <= 10.0) {
      ++hits;
      expect(label == SeverityLabel::MOD, "band MOD missed " + fmt(v));
    }
    if (v > 10.0) {
      ++hits;
      expect(label == SeverityLabel::SV, "band SV missed " + fmt(v));
    }
    expect(hits == 1, fmt(v) + " matched " + std::to_string(hits) + " bands");
  }

  std::sort(values.begin(), values.end());
  for (std::size_t i = 1; i < values.size(); ++i) {
    expect(cohort::label_from_oahi3(values[i - 1]) <= cohort::label_from_oahi3(values[i]),
           "severity is not monotone in oahi3");
  }
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<void()> fn;
  };
  const Criterion criteria[] = {
      {"ecg reference metrics", check_ecg_reference},
      {"all-channel reference accuracies", check_all_channel_accuracies},
      {"full-scale segmentation arithmetic", check_full_scale_segmentation},
      {"gradient finite-difference suite", check_gradients},
      {"end-to-end synthetic training", check_end_to_end},
      {"split invariants and subject disjointness", check_split_invariants},
      {"edf round trip and rejection", check_edf_round_trip},
      {"seeded training determinism", check_training_determinism},
      {"severity labeling partition", check_label_partition},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    try {
      c.fn();
      std::printf("PASS: %s\n", c.name);
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL: %s — %s\n", c.name, e.what());
      if (std::strcmp(c.name, "end-to-end synthetic training") == 0) {
        g_e2e_error = std::string("end-to-end run failed: ") + e.what();
        g_e2e.reset();
      }
    }
    std::fflush(stdout);
  }

  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures;
}
