#include "osanet/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace osanet::nn {

ModelConfig full_architecture() {
  ModelConfig cfg;
  cfg.blocks = {
      {46, 10, 2, 10, 2},
      {92, 10, 2, 10, 2},
      {184, 20, 2, 20, 5},
  };
  cfg.hidden_units = 100;
  cfg.dropout_keep = 0.5f;
  cfg.num_classes = 4;
  return cfg;
}

ModelConfig compact_architecture() {
  ModelConfig cfg;
  cfg.blocks = {
      {12, 8, 2, 4, 4},
      {24, 8, 2, 4, 4},
  };
  cfg.hidden_units = 32;
  cfg.dropout_keep = 0.5f;
  cfg.num_classes = 4;
  return cfg;
}

namespace {

void he_uniform(std::vector<float>& w, std::size_t fan_in, SplitMix64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (float& x : w) x = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

Model Model::build(std::size_t seq_len, std::size_t in_channels, const ModelConfig& config,
                   std::uint64_t seed) {
  if (config.blocks.empty()) throw NnError("model needs at least one conv block");
  if (config.num_classes < 2) throw NnError("model needs at least two classes");
  if (!(config.dropout_keep > 0.0f) || config.dropout_keep > 1.0f) {
    throw NnError("dropout keep probability must be in (0, 1]");
  }

  Model m;
  m.seq_len_ = seq_len;
  m.in_channels_ = in_channels;
  m.config_ = config;
  m.dropout_ = Dropout<float>(config.dropout_keep);

  SplitMix64 rng(seed);
  std::size_t length = seq_len;
  std::size_t channels = in_channels;
  for (std::size_t i = 0; i < config.blocks.size(); ++i) {
    const ConvBlockSpec& blk = config.blocks[i];
    if (length < blk.conv_kernel) {
      throw NnError("seq_len too short: conv " + std::to_string(i + 1) + " needs length >= " +
                    std::to_string(blk.conv_kernel) + ", has " + std::to_string(length));
    }
    Conv1d<float> conv(channels, blk.filters, blk.conv_kernel, blk.conv_stride);
    he_uniform(conv.weights, channels * blk.conv_kernel, rng);
    length = out_length(length, blk.conv_kernel, blk.conv_stride);
    channels = blk.filters;

    if (length < blk.pool_window) {
      throw NnError("seq_len too short: pool " + std::to_string(i + 1) + " needs length >= " +
                    std::to_string(blk.pool_window) + ", has " + std::to_string(length));
    }
    length = out_length(length, blk.pool_window, blk.pool_stride);

    m.convs_.push_back(std::move(conv));
    m.pools_.emplace_back(blk.pool_window, blk.pool_stride);
  }

  m.flatten_width_ = length * channels;
  m.hidden_ = Dense<float>(m.flatten_width_, config.hidden_units, /*relu=*/true);
  he_uniform(m.hidden_.weights, m.flatten_width_, rng);
  m.classifier_ = Dense<float>(config.hidden_units, config.num_classes, /*relu=*/false);
  he_uniform(m.classifier_.weights, config.hidden_units, rng);
  return m;
}

Model build_model(std::size_t seq_len, std::size_t in_channels, const ModelConfig& config,
                  std::uint64_t seed) {
  return Model::build(seq_len, in_channels, config, seed);
}

void Model::set_dropout_keep(float keep) {
  dropout_ = Dropout<float>(keep);  // the ctor validates (0, 1]
  config_.dropout_keep = keep;
}

std::vector<std::size_t> Model::chain_lengths() const {
  std::vector<std::size_t> lengths;
  std::size_t length = seq_len_;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    length = out_length(length, convs_[i].kernel, convs_[i].stride);
    lengths.push_back(length);
    length = out_length(length, pools_[i].window, pools_[i].stride);
    lengths.push_back(length);
  }
  return lengths;
}

Tensor2f Model::forward(const Tensor3f& x) const {
  if (x.length != seq_len_ || x.channels != in_channels_) {
    throw NnError("model: input is " + std::to_string(x.length) + "x" +
                  std::to_string(x.channels) + ", expected " + std::to_string(seq_len_) + "x" +
                  std::to_string(in_channels_));
  }
  Tensor3f h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i].forward(h);
    h = pools_[i].forward(h);
  }
  Tensor2f flat = flatten(h);
  Tensor2f hid = hidden_.forward(flat);
  return classifier_.forward(hid);  // dropout is the identity in eval mode
}

Tensor2f Model::forward_train(const Tensor3f& x, SplitMix64& rng, TrainCache& cache) const {
  if (x.length != seq_len_ || x.channels != in_channels_) {
    throw NnError("model: training batch is " + std::to_string(x.length) + "x" +
                  std::to_string(x.channels) + ", expected " + std::to_string(seq_len_) + "x" +
                  std::to_string(in_channels_));
  }
  cache.conv_in.clear();
  cache.conv_out.clear();
  cache.pool_argmax.assign(convs_.size(), {});
  cache.pool_out.clear();

  Tensor3f h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    cache.conv_in.push_back(h);
    Tensor3f activated = convs_[i].forward(h);
    cache.conv_out.push_back(activated);
    h = pools_[i].forward(activated, &cache.pool_argmax[i]);
    cache.pool_out.push_back(h);
  }
  cache.hidden_in = flatten(h);
  cache.hidden_out = hidden_.forward(cache.hidden_in);
  cache.dropout_out = dropout_.forward_train(cache.hidden_out, rng, cache.dropout_mask);
  cache.logits = classifier_.forward(cache.dropout_out);
  return cache.logits;
}

std::vector<std::vector<float>> Model::backward(const TrainCache& cache,
                                                const Tensor2f& grad_logits) const {
  std::vector<std::vector<float>> grads(parameter_sizes().size());
  const std::size_t n_blocks = convs_.size();

  std::vector<float> gw, gb;
  Tensor2f g2 =
      classifier_.backward(cache.dropout_out, cache.logits, grad_logits, gw, gb);
  grads[2 * n_blocks + 2] = std::move(gw);
  grads[2 * n_blocks + 3] = std::move(gb);

  g2 = dropout_.backward(g2, cache.dropout_mask);

  g2 = hidden_.backward(cache.hidden_in, cache.hidden_out, g2, gw, gb);
  grads[2 * n_blocks] = std::move(gw);
  grads[2 * n_blocks + 1] = std::move(gb);

  const Tensor3f& last_pool = cache.pool_out.back();
  Tensor3f g3 = unflatten(g2, last_pool.length, last_pool.channels);

  for (std::size_t i = n_blocks; i-- > 0;) {
    g3 = pools_[i].backward(cache.conv_out[i].length, cache.pool_argmax[i], g3);
    g3 = convs_[i].backward(cache.conv_in[i], cache.conv_out[i], g3, gw, gb);
    grads[2 * i] = std::move(gw);
    grads[2 * i + 1] = std::move(gb);
  }
  return grads;
}

std::vector<std::span<float>> Model::parameters() {
  std::vector<std::span<float>> out;
  for (auto& conv : convs_) {
    out.emplace_back(conv.weights);
    out.emplace_back(conv.bias);
  }
  out.emplace_back(hidden_.weights);
  out.emplace_back(hidden_.bias);
  out.emplace_back(classifier_.weights);
  out.emplace_back(classifier_.bias);
  return out;
}

std::vector<std::span<const float>> Model::parameters() const {
  std::vector<std::span<const float>> out;
  for (const auto& conv : convs_) {
    out.emplace_back(conv.weights);
    out.emplace_back(conv.bias);
  }
  out.emplace_back(hidden_.weights);
  out.emplace_back(hidden_.bias);
  out.emplace_back(classifier_.weights);
  out.emplace_back(classifier_.bias);
  return out;
}

std::vector<std::size_t> Model::parameter_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& conv : convs_) {
    sizes.push_back(conv.weights.size());
    sizes.push_back(conv.bias.size());
  }
  sizes.push_back(hidden_.weights.size());
  sizes.push_back(hidden_.bias.size());
  sizes.push_back(classifier_.weights.size());
  sizes.push_back(classifier_.bias.size());
  return sizes;
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

constexpr char kModelMagic[8] = {'O', 'S', 'N', 'M', 'O', 'D', 'L', '1'};

void put_u64(std::ofstream& f, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& f, const char* what) {
  std::uint8_t b[8];
  if (!f.read(reinterpret_cast<char*>(b), 8)) {
    throw NnError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f32(std::ofstream& f, float v) {
  static_assert(sizeof(float) == 4);
  f.write(reinterpret_cast<const char*>(&v), 4);
}

float get_f32(std::ifstream& f, const char* what) {
  float v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 4)) {
    throw NnError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

void put_blob(std::ofstream& f, std::span<const float> data) {
  put_u64(f, data.size());
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
}

void get_blob(std::ifstream& f, std::span<float> data, const char* what) {
  const std::uint64_t n = get_u64(f, what);
  if (n != data.size()) {
    throw NnError(std::string("checkpoint blob size mismatch for ") + what + ": file has " +
                  std::to_string(n) + ", model needs " + std::to_string(data.size()));
  }
  if (!f.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(n * sizeof(float)))) {
    throw NnError(std::string("checkpoint truncated while reading ") + what);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState<float>* adam) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw NnError("cannot open '" + path.string() + "' for writing");

  f.write(kModelMagic, 8);
  const ModelConfig& cfg = model.config();
  put_u64(f, model.seq_len());
  put_u64(f, model.in_channels());
  put_u64(f, cfg.num_classes);
  put_u64(f, cfg.hidden_units);
  put_f32(f, cfg.dropout_keep);
  put_u64(f, cfg.blocks.size());
  for (const auto& blk : cfg.blocks) {
    put_u64(f, blk.filters);
    put_u64(f, blk.conv_kernel);
    put_u64(f, blk.conv_stride);
    put_u64(f, blk.pool_window);
    put_u64(f, blk.pool_stride);
  }
  for (auto p : model.parameters()) put_blob(f, p);

  f.put(adam ? 1 : 0);
  if (adam) {
    put_u64(f, adam->step);
    put_f32(f, adam->lr);
    put_f32(f, adam->beta1);
    put_f32(f, adam->beta2);
    put_f32(f, adam->epsilon);
    for (const auto& m : adam->m) put_blob(f, m);
    for (const auto& v : adam->v) put_blob(f, v);
  }
  if (!f) throw NnError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NnError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kModelMagic, 8) != 0) {
    throw NnError("'" + path.string() + "' is not a model checkpoint (bad magic)");
  }

  const std::size_t seq_len = static_cast<std::size_t>(get_u64(f, "seq_len"));
  const std::size_t in_channels = static_cast<std::size_t>(get_u64(f, "in_channels"));
  ModelConfig cfg;
  cfg.num_classes = static_cast<std::size_t>(get_u64(f, "num_classes"));
  cfg.hidden_units = static_cast<std::size_t>(get_u64(f, "hidden_units"));
  cfg.dropout_keep = get_f32(f, "dropout_keep");
  const std::uint64_t n_blocks = get_u64(f, "block count");
  for (std::uint64_t i = 0; i < n_blocks; ++i) {
    ConvBlockSpec blk;
    blk.filters = static_cast<std::size_t>(get_u64(f, "filters"));
    blk.conv_kernel = static_cast<std::size_t>(get_u64(f, "conv_kernel"));
    blk.conv_stride = static_cast<std::size_t>(get_u64(f, "conv_stride"));
    blk.pool_window = static_cast<std::size_t>(get_u64(f, "pool_window"));
    blk.pool_stride = static_cast<std::size_t>(get_u64(f, "pool_stride"));
    cfg.blocks.push_back(blk);
  }

  Checkpoint ckpt{Model::build(seq_len, in_channels, cfg, /*seed=*/0), std::nullopt};
  for (auto p : ckpt.model.parameters()) get_blob(f, p, "parameters");

  const int has_adam = f.get();
  if (has_adam == 1) {
    AdamState<float> adam = AdamState<float>::init(ckpt.model.parameter_sizes());
    adam.step = get_u64(f, "adam step");
    adam.lr = get_f32(f, "adam lr");
    adam.beta1 = get_f32(f, "adam beta1");
    adam.beta2 = get_f32(f, "adam beta2");
    adam.epsilon = get_f32(f, "adam epsilon");
    for (auto& m : adam.m) get_blob(f, m, "adam m");
    for (auto& v : adam.v) get_blob(f, v, "adam v");
    ckpt.adam = std::move(adam);
  } else if (has_adam != 0) {
    throw NnError("checkpoint truncated at optimizer flag");
  }
  return ckpt;
}

}  // namespace osanet::nn
