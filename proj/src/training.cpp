#include "osanet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "osanet/rng.hpp"

namespace osanet::train {

namespace {

// Seeded partial Fisher-Yates: the first `take` slots end up a uniform
// without-replacement draw; the tail keeps the leftovers.
void draw_front(std::vector<std::size_t>& pool, std::size_t take, SplitMix64& rng) {
  for (std::size_t i = 0; i < take && i + 1 < pool.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

SplitPlan stratified_split(const cohort::Cohort& cohort, std::uint64_t seed) {
  constexpr std::size_t kPerClass = 8;
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    if (cohort.per_class_counts()[c] != kPerClass) {
      throw TrainError("stratified split needs exactly " + std::to_string(kPerClass) + " " +
                       cohort::to_string(static_cast<cohort::SeverityLabel>(c)) +
                       " subjects, cohort has " + std::to_string(cohort.per_class_counts()[c]));
    }
  }

  SplitMix64 rng(seed);
  SplitPlan plan;
  plan.seed = seed;

  // Level 1: two test subjects from every class.
  std::array<std::vector<std::size_t>, cohort::kNumClasses> remaining;
  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (static_cast<std::size_t>(cohort.subjects()[i].label) == c) pool.push_back(i);
    }
    draw_front(pool, 2, rng);
    plan.test_subjects.push_back(cohort.subjects()[pool[0]].subject_id);
    plan.test_subjects.push_back(cohort.subjects()[pool[1]].subject_id);
    remaining[c].assign(pool.begin() + 2, pool.end());
  }

  // Level 2: 24 left, 6 per class; 18/6 cannot be class-even, so a seeded
  // draw picks the two classes that send 5 (not 4) subjects to training.
  std::vector<std::size_t> class_order(cohort::kNumClasses);
  std::iota(class_order.begin(), class_order.end(), 0);
  draw_front(class_order, class_order.size(), rng);
  std::array<std::size_t, cohort::kNumClasses> train_quota;
  for (std::size_t rank = 0; rank < cohort::kNumClasses; ++rank) {
    train_quota[class_order[rank]] = rank < 2 ? 5 : 4;
  }

  for (std::size_t c = 0; c < cohort::kNumClasses; ++c) {
    auto& pool = remaining[c];
    draw_front(pool, train_quota[c], rng);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const std::string& id = cohort.subjects()[pool[i]].subject_id;
      (i < train_quota[c] ? plan.train_subjects : plan.val_subjects).push_back(id);
    }
  }
  return plan;
}

std::string split_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["test"] = plan.test_subjects;
  j["train"] = plan.train_subjects;
  j["val"] = plan.val_subjects;
  return j.dump(2) + "\n";
}

SplitPlan split_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TrainError(std::string("split file is not valid JSON: ") + e.what());
  }
  SplitPlan plan;
  try {
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.test_subjects = j.at("test").get<std::vector<std::string>>();
    plan.train_subjects = j.at("train").get<std::vector<std::string>>();
    plan.val_subjects = j.at("val").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw TrainError(std::string("split file is missing fields: ") + e.what());
  }
  return plan;
}

void save_split(const std::filesystem::path& path, const SplitPlan& plan) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw TrainError("cannot open '" + path.string() + "' for writing");
  f << split_to_json(plan);
  if (!f) throw TrainError("write failed for '" + path.string() + "'");
}

SplitPlan load_split(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TrainError("cannot open split file '" + path.string() + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return split_from_json(buf.str());
}

std::string curve_to_csv(const LearningCurve& curve) {
  std::ostringstream out;
  out << "iteration,train_acc,train_loss,val_acc,val_loss\n";
  char buf[160];
  for (const CurvePoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f\n", p.iteration, p.train_acc,
                  p.train_loss, p.val_acc, p.val_loss);
    out << buf;
  }
  return out.str();
}

void save_curve(const std::filesystem::path& path, const LearningCurve& curve) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw TrainError("cannot open '" + path.string() + "' for writing");
  f << curve_to_csv(curve);
  if (!f) throw TrainError("write failed for '" + path.string() + "'");
}

namespace {

constexpr std::size_t kEvalSlice = 256;

void check_shape(const nn::Model& model, const pipeline::SegmentTensor& tensor,
                 const char* which) {
  if (tensor.size() == 0) throw TrainError(std::string(which) + " tensor is empty");
  if (tensor.seq_len != model.seq_len() || tensor.channels != model.in_channels()) {
    throw TrainError(std::string(which) + " tensor is " + std::to_string(tensor.seq_len) + "x" +
                     std::to_string(tensor.channels) + " but conv1 expects " +
                     std::to_string(model.seq_len()) + "x" + std::to_string(model.in_channels()) +
                     " input");
  }
}

nn::Tensor3f gather(const pipeline::SegmentTensor& tensor, const std::vector<std::size_t>& rows,
                    std::size_t begin, std::size_t count, std::vector<std::uint8_t>& labels) {
  nn::Tensor3f batch(count, tensor.seq_len, tensor.channels);
  labels.resize(count);
  const std::size_t row_len = tensor.seq_len * tensor.channels;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = rows[begin + i];
    std::copy_n(tensor.row(r), row_len, batch.v.begin() + i * row_len);
    labels[i] = tensor.labels[r];
  }
  return batch;
}

}  // namespace

EvalResult evaluate_rows(const nn::Model& model, const pipeline::SegmentTensor& tensor,
                         const std::vector<std::size_t>& rows) {
  check_shape(model, tensor, "evaluation");
  if (rows.empty()) throw TrainError("evaluation row set is empty");

  EvalResult result;
  result.predictions.reserve(rows.size());
  double loss_acc = 0.0;
  std::size_t correct = 0;
  std::vector<std::uint8_t> labels;

  for (std::size_t begin = 0; begin < rows.size(); begin += kEvalSlice) {
    const std::size_t count = std::min(kEvalSlice, rows.size() - begin);
    const nn::Tensor3f batch = gather(tensor, rows, begin, count, labels);
    const nn::Tensor2f logits = model.forward(batch);
    const auto sm = nn::softmax_cross_entropy(logits, labels);
    loss_acc += static_cast<double>(sm.loss) * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols; ++c) {
        if (logits.at(i, c) > logits.at(i, best)) best = c;
      }
      result.predictions.push_back(static_cast<std::uint8_t>(best));
      if (best == labels[i]) ++correct;
    }
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  result.mean_loss = loss_acc / static_cast<double>(rows.size());
  return result;
}

EvalResult evaluate(const nn::Model& model, const pipeline::SegmentTensor& tensor) {
  std::vector<std::size_t> rows(tensor.size());
  std::iota(rows.begin(), rows.end(), 0);
  return evaluate_rows(model, tensor, rows);
}

TrainResult train(nn::Model model, const pipeline::SegmentTensor& train_tensor,
                  const pipeline::SegmentTensor& val_tensor, const TrainConfig& config) {
  check_shape(model, train_tensor, "train");
  check_shape(model, val_tensor, "val");
  if (config.batch_size < 1) throw TrainError("batch_size must be >= 1");
  if (config.eval_every < 1) throw TrainError("eval_every must be >= 1");
  if (!(config.learning_rate > 0.0)) throw TrainError("learning_rate must be positive");
  if (config.train_eval_cap < 1) throw TrainError("train_eval_cap must be >= 1");

  // Hard requirement: a subject feeds training or evaluation, never both.
  {
    std::set<std::string> train_ids(train_tensor.subject_table.begin(),
                                    train_tensor.subject_table.end());
    for (const std::string& id : val_tensor.subject_table) {
      if (train_ids.count(id)) {
        throw TrainError("subject '" + id + "' appears in both train and val tensors");
      }
    }
  }

  model.set_dropout_keep(config.dropout_keep);
  SplitMix64 rng(config.seed);

  // Fixed train-side scoring subset, drawn once up front.
  std::vector<std::size_t> train_eval_rows(train_tensor.size());
  std::iota(train_eval_rows.begin(), train_eval_rows.end(), 0);
  if (train_eval_rows.size() > config.train_eval_cap) {
    draw_front(train_eval_rows, config.train_eval_cap, rng);
    train_eval_rows.resize(config.train_eval_cap);
    std::sort(train_eval_rows.begin(), train_eval_rows.end());
  }

  TrainResult result{std::move(model), nn::AdamState<float>(), LearningCurve{}, std::nullopt};
  result.adam = nn::AdamState<float>::init(result.model.parameter_sizes(),
                                           static_cast<float>(config.learning_rate));

  auto record = [&](std::size_t iteration) {
    const EvalResult tr = evaluate_rows(result.model, train_tensor, train_eval_rows);
    const EvalResult va = evaluate(result.model, val_tensor);
    result.curve.points.push_back(
        {iteration, tr.accuracy, tr.mean_loss, va.accuracy, va.mean_loss});
  };

  record(0);

  std::vector<std::size_t> batch_rows(config.batch_size);
  std::vector<std::uint8_t> batch_labels;
  nn::Model::TrainCache cache;
  const std::size_t n_train = train_tensor.size();

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      batch_rows[i] = static_cast<std::size_t>(rng.next_below(n_train));
    }
    const nn::Tensor3f batch = gather(train_tensor, batch_rows, 0, config.batch_size, batch_labels);
    result.model.forward_train(batch, rng, cache);
    const auto sm = nn::softmax_cross_entropy(cache.logits, batch_labels);
    if (!std::isfinite(static_cast<double>(sm.loss))) {
      // Stop before the parameters are touched: the model stays last-good.
      result.diverged_at = it;
      break;
    }
    const auto grads = result.model.backward(cache, sm.grad);
    nn::adam_step(result.adam, result.model.parameters(), grads);

    if (it % config.eval_every == 0) record(it);
  }

  if (!result.diverged_at && config.iterations > 0 && config.iterations % config.eval_every != 0) {
    record(config.iterations);
  }
  return result;
}

}  // namespace osanet::train
