// osanet command line: synth / split / preprocess / train / evaluate /
// edf-info. Every writing command drops a resolved-config copy next to its
// outputs so a run can be reproduced from the artifacts alone.

#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "osanet/cohort.hpp"
#include "osanet/edf.hpp"
#include "osanet/metrics.hpp"
#include "osanet/model.hpp"
#include "osanet/pipeline.hpp"
#include "osanet/rng.hpp"
#include "osanet/runconfig.hpp"
#include "osanet/synth.hpp"
#include "osanet/training.hpp"

namespace {

using osanet::config::RunConfig;

// Layering: defaults < config file < explicit flags. CLI11 already applied
// the flags, so a config value only lands where the flag was absent.
struct Layering {
  CLI::App* cmd = nullptr;
  const RunConfig* file = nullptr;

  bool from_file(const std::string& flag, const std::string& key) const {
    return cmd->count(flag) == 0 && file && file->has(key);
  }
  void u64(const std::string& flag, const std::string& key, std::uint64_t& var) const {
    if (from_file(flag, key)) var = file->get_uint(key, var);
  }
  void sz(const std::string& flag, const std::string& key, std::size_t& var) const {
    if (from_file(flag, key)) var = static_cast<std::size_t>(file->get_uint(key, var));
  }
  void dbl(const std::string& flag, const std::string& key, double& var) const {
    if (from_file(flag, key)) var = file->get_double(key, var);
  }
  void str(const std::string& flag, const std::string& key, std::string& var) const {
    if (from_file(flag, key)) var = file->get_string(key, var);
  }
};

std::string format_rate(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int run_edf_info(const std::string& path) {
  const std::vector<std::uint8_t> raw = osanet::edf::read_file(path);
  osanet::edf::ParseReport report;
  const auto [header, specs] = osanet::edf::parse_header(raw, &report);

  char buf[256];
  std::printf("file:       %s\n", path.c_str());
  std::printf("version:    %s\n", header.version.c_str());
  std::printf("patient:    %s\n", header.patient_id.c_str());
  std::printf("recording:  %s\n", header.recording_id.c_str());
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", header.start.year,
                header.start.month, header.start.day, header.start.hour, header.start.minute,
                header.start.second);
  std::printf("start:      %s\n", buf);
  std::printf("records:    %lld x %s s (%s s total)\n", header.num_records,
              format_rate(header.record_duration).c_str(),
              format_rate(static_cast<double>(header.num_records) * header.record_duration).c_str());
  std::printf("signals:    %d\n\n", header.num_signals);

  std::printf("%-18s %10s %12s %22s %-8s\n", "label", "rate_hz", "samples/rec", "physical_range",
              "dim");
  for (const auto& s : specs) {
    std::snprintf(buf, sizeof(buf), "[%g, %g]", s.physical_min, s.physical_max);
    std::printf("%-18s %10s %12lld %22s %-8s\n", s.label.c_str(),
                format_rate(s.sampling_rate(header.record_duration)).c_str(), s.samples_per_record,
                buf, s.physical_dimension.c_str());
  }
  if (report.num_records_from_size) {
    std::fprintf(stderr, "note: record count was -1 in the header, resolved from file size\n");
  }
  if (report.replaced_header_bytes > 0) {
    std::fprintf(stderr, "note: %zu non-ASCII header bytes replaced\n",
                 report.replaced_header_bytes);
  }
  return 0;
}

RunConfig synth_resolved(const osanet::synth::SynthSpec& spec) {
  RunConfig rc;
  rc.set_uint("synth.subjects_per_class", spec.subjects_per_class);
  rc.set_double("synth.duration_sec", spec.duration_sec);
  rc.set_double("synth.awake_head_sec", spec.awake_head_sec);
  rc.set_double("synth.awake_tail_sec", spec.awake_tail_sec);
  rc.set_double("synth.record_duration_sec", spec.record_duration_sec);
  rc.set_double("synth.rate_ecg", spec.group_rate_hz[0]);
  rc.set_double("synth.rate_eeg", spec.group_rate_hz[1]);
  rc.set_double("synth.rate_emg", spec.group_rate_hz[2]);
  rc.set_double("synth.rate_resp", spec.group_rate_hz[3]);
  rc.set_double("synth.base_freq_hz", spec.base_freq_hz);
  rc.set_double("synth.base_amp", spec.base_amp);
  rc.set_double("synth.burst_len_sec", spec.burst_len_sec);
  rc.set_double("synth.noise_level", spec.noise_level);
  rc.set_uint("synth.seed", spec.seed);
  rc.set("synth.id_prefix", spec.id_prefix);
  static const char* kClassKey[4] = {"nl", "min", "mod", "sv"};
  for (std::size_t c = 0; c < 4; ++c) {
    const std::string k = std::string("synth.") + kClassKey[c];
    rc.set_double(k + "_burst_rate_per_min", spec.signatures[c].burst_rate_per_min);
    rc.set_double(k + "_burst_amp", spec.signatures[c].burst_amp);
    rc.set_double(k + "_carrier_freq_hz", spec.signatures[c].carrier_freq_hz);
  }
  return rc;
}

void synth_from_config(osanet::synth::SynthSpec& spec, const RunConfig& file) {
  spec.awake_head_sec = file.get_double("synth.awake_head_sec", spec.awake_head_sec);
  spec.awake_tail_sec = file.get_double("synth.awake_tail_sec", spec.awake_tail_sec);
  spec.record_duration_sec =
      file.get_double("synth.record_duration_sec", spec.record_duration_sec);
  spec.base_freq_hz = file.get_double("synth.base_freq_hz", spec.base_freq_hz);
  spec.base_amp = file.get_double("synth.base_amp", spec.base_amp);
  spec.burst_len_sec = file.get_double("synth.burst_len_sec", spec.burst_len_sec);
  spec.group_rate_hz[0] = file.get_double("synth.rate_ecg", spec.group_rate_hz[0]);
  spec.group_rate_hz[1] = file.get_double("synth.rate_eeg", spec.group_rate_hz[1]);
  spec.group_rate_hz[2] = file.get_double("synth.rate_emg", spec.group_rate_hz[2]);
  spec.group_rate_hz[3] = file.get_double("synth.rate_resp", spec.group_rate_hz[3]);
  static const char* kClassKey[4] = {"nl", "min", "mod", "sv"};
  for (std::size_t c = 0; c < 4; ++c) {
    const std::string k = std::string("synth.") + kClassKey[c];
    auto& sig = spec.signatures[c];
    sig.burst_rate_per_min = file.get_double(k + "_burst_rate_per_min", sig.burst_rate_per_min);
    sig.burst_amp = file.get_double(k + "_burst_amp", sig.burst_amp);
    sig.carrier_freq_hz = file.get_double(k + "_carrier_freq_hz", sig.carrier_freq_hz);
  }
}

osanet::cohort::Cohort subset_cohort(const osanet::cohort::Cohort& cohort,
                                     const osanet::train::SplitPlan& plan,
                                     const std::string& subset) {
  const std::vector<std::string>* ids = nullptr;
  if (subset == "train") ids = &plan.train_subjects;
  else if (subset == "val") ids = &plan.val_subjects;
  else if (subset == "test") ids = &plan.test_subjects;
  else throw osanet::train::TrainError("unknown subset '" + subset + "'");

  std::set<std::string> wanted(ids->begin(), ids->end());
  std::vector<osanet::cohort::Subject> chosen;
  for (const auto& s : cohort.subjects()) {
    if (wanted.erase(s.subject_id)) chosen.push_back(s);
  }
  if (!wanted.empty()) {
    throw osanet::train::TrainError("split subject '" + *wanted.begin() +
                                    "' is not in the manifest");
  }
  return osanet::cohort::Cohort(std::move(chosen));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OSA severity pipeline: synthetic cohorts, EDF preprocessing, CNN training"};
  app.require_subcommand(1);

  // --- edf-info ---------------------------------------------------------
  auto* cmd_info = app.add_subcommand("edf-info", "Print an EDF header and its signal table");
  std::string info_path;
  cmd_info->add_option("path", info_path, "EDF file")->required();

  // --- synth ------------------------------------------------------------
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic EDF cohort");
  osanet::synth::SynthSpec synth_spec;
  std::string synth_out, synth_config;
  cmd_synth->add_option("--out", synth_out, "output directory")->required();
  cmd_synth->add_option("--subjects-per-class", synth_spec.subjects_per_class);
  cmd_synth->add_option("--duration-sec", synth_spec.duration_sec);
  cmd_synth->add_option("--noise", synth_spec.noise_level);
  cmd_synth->add_option("--seed", synth_spec.seed);
  cmd_synth->add_option("--id-prefix", synth_spec.id_prefix);
  cmd_synth->add_option("--config", synth_config, "key = value config file");

  // --- split ------------------------------------------------------------
  auto* cmd_split = app.add_subcommand("split", "Stratified subject-level train/val/test split");
  std::string split_manifest, split_out;
  std::uint64_t split_seed = 1;
  cmd_split->add_option("--manifest", split_manifest, "cohort manifest CSV")->required();
  cmd_split->add_option("--seed", split_seed);
  cmd_split->add_option("--out", split_out, "split JSON path")->required();

  // --- preprocess -------------------------------------------------------
  auto* cmd_prep = app.add_subcommand("preprocess", "EDF cohort -> segment tensor file");
  std::string prep_manifest, prep_group = "ecg", prep_annotations, prep_split, prep_subset,
              prep_out, prep_config;
  double prep_seq_seconds = 60.0;
  cmd_prep->add_option("--manifest", prep_manifest, "cohort manifest CSV")->required();
  cmd_prep->add_option("--group", prep_group, "channel group: ecg|eeg|emg|resp");
  cmd_prep->add_option("--seq-seconds", prep_seq_seconds, "segment length in seconds");
  cmd_prep->add_option("--annotations", prep_annotations, "sleep-window sidecar CSV");
  cmd_prep->add_option("--split", prep_split, "split JSON (needs --subset)");
  cmd_prep->add_option("--subset", prep_subset, "train|val|test");
  cmd_prep->add_option("--out", prep_out, "tensor output path")->required();
  cmd_prep->add_option("--config", prep_config, "key = value config file");

  // --- train ------------------------------------------------------------
  auto* cmd_train = app.add_subcommand("train", "Train the CNN on tensor files");
  std::string train_train, train_val, train_out, train_arch = "full", train_config;
  osanet::train::TrainConfig tc;
  std::size_t train_hidden = 0;  // 0: architecture default
  double train_dropout_keep = 0.5;
  cmd_train->add_option("--train", train_train, "training tensor file")->required();
  cmd_train->add_option("--val", train_val, "validation tensor file")->required();
  cmd_train->add_option("--out", train_out, "output directory")->required();
  cmd_train->add_option("--arch", train_arch, "full|small");
  cmd_train->add_option("--hidden", train_hidden, "dense width (0 keeps the default)");
  cmd_train->add_option("--iterations", tc.iterations);
  cmd_train->add_option("--batch-size", tc.batch_size);
  cmd_train->add_option("--lr", tc.learning_rate);
  cmd_train->add_option("--dropout-keep", train_dropout_keep);
  cmd_train->add_option("--seed", tc.seed);
  cmd_train->add_option("--eval-every", tc.eval_every);
  cmd_train->add_option("--config", train_config, "key = value config file");

  // --- evaluate ---------------------------------------------------------
  auto* cmd_eval = app.add_subcommand("evaluate", "Score a checkpoint on a tensor file");
  std::string eval_ckpt, eval_tensor, eval_out;
  cmd_eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  cmd_eval->add_option("--tensor", eval_tensor, "tensor file")->required();
  cmd_eval->add_option("--out", eval_out, "directory for the JSON report (optional)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_info->parsed()) {
      return run_edf_info(info_path);
    }

    if (cmd_synth->parsed()) {
      RunConfig file;
      if (!synth_config.empty()) file = RunConfig::load(synth_config);
      Layering lay{cmd_synth, &file};
      lay.sz("--subjects-per-class", "synth.subjects_per_class", synth_spec.subjects_per_class);
      lay.dbl("--duration-sec", "synth.duration_sec", synth_spec.duration_sec);
      lay.dbl("--noise", "synth.noise_level", synth_spec.noise_level);
      lay.u64("--seed", "synth.seed", synth_spec.seed);
      lay.str("--id-prefix", "synth.id_prefix", synth_spec.id_prefix);
      synth_from_config(synth_spec, file);

      const auto generated = osanet::synth::generate_cohort(synth_spec, synth_out);
      synth_resolved(synth_spec).save(std::filesystem::path(synth_out) / "resolved.cfg");
      std::printf("wrote %zu subjects to %s\n", generated.cohort.size(), synth_out.c_str());
      std::printf("manifest:    %s\n", generated.manifest_path.string().c_str());
      std::printf("annotations: %s\n", generated.annotations_path.string().c_str());
      return 0;
    }

    if (cmd_split->parsed()) {
      auto cohort = osanet::cohort::load_manifest(split_manifest);
      bool undersampled = false;
      for (std::size_t c = 0; c < osanet::cohort::kNumClasses; ++c) {
        if (cohort.per_class_counts()[c] > 8) undersampled = true;
      }
      if (undersampled) {
        cohort = osanet::cohort::undersample(cohort, 8, osanet::derive_seed(split_seed, 1));
        std::fprintf(stderr, "note: cohort under-sampled to 8 subjects per class\n");
      }
      const auto plan = osanet::train::stratified_split(cohort, split_seed);
      osanet::train::save_split(split_out, plan);

      RunConfig rc;
      rc.set("split.manifest", split_manifest);
      rc.set_uint("split.seed", split_seed);
      rc.set_bool("split.undersampled", undersampled);
      rc.save(split_out + ".resolved.cfg");
      std::printf("wrote %s (8 test / %zu train / %zu val)\n", split_out.c_str(),
                  plan.train_subjects.size(), plan.val_subjects.size());
      return 0;
    }

    if (cmd_prep->parsed()) {
      RunConfig file;
      if (!prep_config.empty()) file = RunConfig::load(prep_config);
      Layering lay{cmd_prep, &file};
      lay.str("--group", "preprocess.group", prep_group);
      lay.dbl("--seq-seconds", "preprocess.seq_seconds", prep_seq_seconds);
      lay.str("--annotations", "preprocess.annotations", prep_annotations);
      lay.str("--split", "preprocess.split", prep_split);
      lay.str("--subset", "preprocess.subset", prep_subset);

      const auto group_name = osanet::pipeline::group_from_string(prep_group);
      if (!group_name) {
        std::fprintf(stderr, "error: unknown group '%s' (want ecg|eeg|emg|resp)\n",
                     prep_group.c_str());
        return 1;
      }
      if (prep_split.empty() != prep_subset.empty()) {
        std::fprintf(stderr, "error: --split and --subset must be given together\n");
        return 1;
      }

      auto cohort = osanet::cohort::load_manifest(prep_manifest);
      if (!prep_split.empty()) {
        const auto plan = osanet::train::load_split(prep_split);
        cohort = subset_cohort(cohort, plan, prep_subset);
      }

      std::map<std::string, osanet::pipeline::SleepWindow> annotations;
      if (!prep_annotations.empty()) {
        annotations = osanet::pipeline::load_annotations(prep_annotations);
      }

      std::vector<std::string> warnings;
      const auto tensor = osanet::pipeline::build_tensor(
          cohort, osanet::pipeline::standard_group(*group_name), annotations, prep_seq_seconds,
          &warnings);
      for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      osanet::pipeline::save_tensor(prep_out, tensor);

      RunConfig rc;
      rc.set("preprocess.manifest", prep_manifest);
      rc.set("preprocess.group", prep_group);
      rc.set_double("preprocess.seq_seconds", prep_seq_seconds);
      if (!prep_annotations.empty()) rc.set("preprocess.annotations", prep_annotations);
      if (!prep_split.empty()) {
        rc.set("preprocess.split", prep_split);
        rc.set("preprocess.subset", prep_subset);
      }
      rc.save(prep_out + ".resolved.cfg");
      std::printf("wrote %s: %zu segments of %zux%zu\n", prep_out.c_str(), tensor.size(),
                  tensor.seq_len, tensor.channels);
      return 0;
    }

    if (cmd_train->parsed()) {
      RunConfig file;
      if (!train_config.empty()) file = RunConfig::load(train_config);
      Layering lay{cmd_train, &file};
      lay.str("--arch", "train.arch", train_arch);
      lay.sz("--hidden", "train.hidden", train_hidden);
      lay.sz("--iterations", "train.iterations", tc.iterations);
      lay.sz("--batch-size", "train.batch_size", tc.batch_size);
      lay.dbl("--lr", "train.learning_rate", tc.learning_rate);
      lay.dbl("--dropout-keep", "train.dropout_keep", train_dropout_keep);
      lay.u64("--seed", "train.seed", tc.seed);
      lay.sz("--eval-every", "train.eval_every", tc.eval_every);
      tc.train_eval_cap =
          static_cast<std::size_t>(file.get_uint("train.train_eval_cap", tc.train_eval_cap));
      tc.dropout_keep = static_cast<float>(train_dropout_keep);

      osanet::nn::ModelConfig arch;
      if (train_arch == "full") arch = osanet::nn::full_architecture();
      else if (train_arch == "small") arch = osanet::nn::compact_architecture();
      else {
        std::fprintf(stderr, "error: unknown arch '%s' (want full|small)\n", train_arch.c_str());
        return 1;
      }
      if (train_hidden > 0) arch.hidden_units = train_hidden;
      arch.dropout_keep = tc.dropout_keep;

      const auto train_tensor = osanet::pipeline::load_tensor(train_train);
      const auto val_tensor = osanet::pipeline::load_tensor(train_val);

      auto model = osanet::nn::Model::build(train_tensor.seq_len, train_tensor.channels, arch,
                                            osanet::derive_seed(tc.seed, 0));
      auto result = osanet::train::train(std::move(model), train_tensor, val_tensor, tc);

      std::filesystem::create_directories(train_out);
      const auto out_dir = std::filesystem::path(train_out);
      osanet::nn::save_checkpoint(out_dir / "model.ckpt", result.model, &result.adam);
      osanet::train::save_curve(out_dir / "curve.csv", result.curve);

      RunConfig rc;
      rc.set("train.train_tensor", train_train);
      rc.set("train.val_tensor", train_val);
      rc.set("train.arch", train_arch);
      rc.set_uint("train.hidden", arch.hidden_units);
      rc.set_uint("train.iterations", tc.iterations);
      rc.set_uint("train.batch_size", tc.batch_size);
      rc.set_double("train.learning_rate", tc.learning_rate);
      rc.set_double("train.dropout_keep", train_dropout_keep);
      rc.set_uint("train.seed", tc.seed);
      rc.set_uint("train.eval_every", tc.eval_every);
      rc.set_uint("train.train_eval_cap", tc.train_eval_cap);
      rc.save(out_dir / "resolved.cfg");

      if (result.diverged_at) {
        std::fprintf(stderr, "error: non-finite loss at iteration %zu; saved last good state\n",
                     *result.diverged_at);
        return 1;
      }
      const auto& last = result.curve.points.back();
      std::printf("trained %zu iterations: train_acc %.4f val_acc %.4f\n", tc.iterations,
                  last.train_acc, last.val_acc);
      std::printf("checkpoint: %s\n", (out_dir / "model.ckpt").string().c_str());
      std::printf("curve:      %s\n", (out_dir / "curve.csv").string().c_str());
      return 0;
    }

    if (cmd_eval->parsed()) {
      const auto ckpt = osanet::nn::load_checkpoint(eval_ckpt);
      const auto tensor = osanet::pipeline::load_tensor(eval_tensor);
      const auto eval = osanet::train::evaluate(ckpt.model, tensor);
      const auto cm = osanet::metrics::confusion(eval.predictions, tensor.labels);
      const auto report = osanet::metrics::report(cm, eval.mean_loss);

      std::fputs(osanet::metrics::to_text(report).c_str(), stdout);
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        const auto out_dir = std::filesystem::path(eval_out);
        const std::string json = osanet::metrics::to_json(report);
        std::ofstream jf(out_dir / "report.json", std::ios::binary);
        jf << json;
        if (!jf) throw std::runtime_error("write failed for report.json");

        RunConfig rc;
        rc.set("evaluate.checkpoint", eval_ckpt);
        rc.set("evaluate.tensor", eval_tensor);
        rc.save(out_dir / "resolved.cfg");
        std::printf("report: %s\n", (out_dir / "report.json").string().c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
