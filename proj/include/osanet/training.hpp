#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "osanet/cohort.hpp"
#include "osanet/model.hpp"
#include "osanet/pipeline.hpp"

namespace osanet::train {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Subject-level assignment: 2 test subjects per class (8), then the remaining
// 24 split 18 train / 6 val as class-even as the integers allow.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> test_subjects;
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
};

// Two-level stratified draw; requires exactly 8 subjects per class.
SplitPlan stratified_split(const cohort::Cohort& cohort, std::uint64_t seed);

std::string split_to_json(const SplitPlan& plan);
SplitPlan split_from_json(const std::string& text);
void save_split(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan load_split(const std::filesystem::path& path);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t iterations = 1000;
  std::size_t batch_size = 32;
  float dropout_keep = 0.5f;
  std::uint64_t seed = 1;
  std::size_t eval_every = 100;
  // The train side of the curve is scored on a fixed random subset of at most
  // this many segments; the val side always uses everything.
  std::size_t train_eval_cap = 2048;
};

struct CurvePoint {
  std::size_t iteration = 0;
  double train_acc = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_loss = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
};

// CSV with header `iteration,train_acc,train_loss,val_acc,val_loss`, six
// decimal places; byte-stable for identical curves.
std::string curve_to_csv(const LearningCurve& curve);
void save_curve(const std::filesystem::path& path, const LearningCurve& curve);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<std::uint8_t> predictions;  // argmax class per evaluated row
};

// Evaluation-mode forward over every row (in fixed-size slices), mean
// cross-entropy in double precision.
EvalResult evaluate(const nn::Model& model, const pipeline::SegmentTensor& tensor);
EvalResult evaluate_rows(const nn::Model& model, const pipeline::SegmentTensor& tensor,
                         const std::vector<std::size_t>& rows);

struct TrainResult {
  nn::Model model;
  nn::AdamState<float> adam;
  LearningCurve curve;
  // Set when a mini-batch produced a non-finite loss; the returned model is
  // the state before that step.
  std::optional<std::size_t> diverged_at;
};

// Seeded mini-batch loop: uniform batches with replacement, dropout only in
// training passes, curve sampled at iteration 0, every eval_every steps, and
// at the end. Train and val tensors must be subject-disjoint.
TrainResult train(nn::Model model, const pipeline::SegmentTensor& train_tensor,
                  const pipeline::SegmentTensor& val_tensor, const TrainConfig& config);

}  // namespace osanet::train
