#include "rite/toy_lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rite/container.hpp"
#include "rite/error.hpp"

namespace rite {
namespace {

constexpr double kNormEps = 1e-7;
constexpr float kInitRange = 0.05f;

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // U(-0.05, 0.05) from the top 53 bits.
  float uniform() noexcept {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return static_cast<float>(-kInitRange + 2.0 * kInitRange * u);
  }

 private:
  std::uint64_t state_;
};

// out = in * w, with w laid out [in x out]. Accumulates in input order.
void matvec(std::span<const float> in, const Matrix& w, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const float a = in[i];
    const auto wr = w.row(i);
    for (std::size_t j = 0; j < w.cols(); ++j) out[j] += a * wr[j];
  }
}

// Writes the zero-mean unit-variance normalization of x into `normalized`
// and the affine result into `out`.
void layer_norm(std::span<const float> x, std::span<const float> gain, std::span<const float> bias,
                std::span<float> normalized, std::span<float> out) {
  double mean = 0.0;
  for (const float v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (const float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(var + kNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    normalized[i] = static_cast<float>((x[i] - mean) * inv);
    out[i] = gain[i] * normalized[i] + bias[i];
  }
}

float gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

// In-place softmax over the first n entries.
void softmax(std::span<float> scores) {
  const float mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (float& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  const float inv = static_cast<float>(1.0 / sum);
  for (float& s : scores) s *= inv;
}

void fill_uniform(SplitMix64& rng, std::span<float> values, float offset = 0.0f) {
  for (float& v : values) v = offset + rng.uniform();
}

}  // namespace

void ToyLMConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (vocab_size != kByteVocabSize) fail("vocab_size must be 259 for the byte tokenizer");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0) {
    fail("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (max_context < 2) fail("max_context must be >= 2");
}

std::size_t ToyLMConfig::parameter_count() const noexcept {
  const std::size_t d = d_model;
  const std::size_t per_layer = 4 * d * d + 2 * d * d_ff + 4 * d;
  return vocab_size * d + max_context * d + n_layers * per_layer + 2 * d;
}

TokenSequence byte_tokenize(std::string_view text, std::size_t max_context) {
  if (text.size() + 1 > max_context) {
    throw Error(ErrorCode::ContextOverflow, std::to_string(text.size() + 1) +
                                               " tokens exceed context of " +
                                               std::to_string(max_context));
  }
  TokenSequence ids;
  ids.reserve(text.size() + 1);
  ids.push_back(kBosToken);
  for (const char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string byte_detokenize(std::span<const int> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (const int t : tokens) {
    if (t >= 0 && t < 256) out.push_back(static_cast<char>(t));
  }
  return out;
}

void apply_frequency_penalty(std::span<float> logits, std::span<const int> generated,
                             double penalty) {
  std::vector<int> counts(logits.size(), 0);
  for (const int t : generated) {
    if (t >= 0 && static_cast<std::size_t>(t) < counts.size()) ++counts[t];
  }
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (counts[t] > 0) logits[t] -= static_cast<float>(penalty * counts[t]);
  }
}

int greedy_pick(std::span<const float> logits) {
  int best = 0;
  for (std::size_t t = 1; t < logits.size(); ++t) {
    if (logits[t] > logits[best]) best = static_cast<int>(t);
  }
  return best;
}

ToyLM::ToyLM(const ToyLMConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  token_embedding_ = Matrix(config_.vocab_size, d);
  position_embedding_ = Matrix(config_.max_context, d);
  layers_.resize(config_.n_layers);
  for (auto& layer : layers_) {
    layer.wq = layer.wk = layer.wv = layer.wo = Matrix(d, d);
    layer.ff1 = Matrix(d, config_.d_ff);
    layer.ff2 = Matrix(config_.d_ff, d);
    layer.ln1_gain = layer.ln1_bias = layer.ln2_gain = layer.ln2_bias = std::vector<float>(d);
  }
  final_gain_ = final_bias_ = std::vector<float>(d);
}

template <typename Fn>
void ToyLM::for_each_tensor(Fn&& fn) {
  fn("token_embedding", token_embedding_.data(), false);
  fn("position_embedding", position_embedding_.data(), false);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    fn(p + "wq", layer.wq.data(), false);
    fn(p + "wk", layer.wk.data(), false);
    fn(p + "wv", layer.wv.data(), false);
    fn(p + "wo", layer.wo.data(), false);
    fn(p + "ff1", layer.ff1.data(), false);
    fn(p + "ff2", layer.ff2.data(), false);
    fn(p + "ln1.gain", std::span<float>(layer.ln1_gain), true);
    fn(p + "ln1.bias", std::span<float>(layer.ln1_bias), false);
    fn(p + "ln2.gain", std::span<float>(layer.ln2_gain), true);
    fn(p + "ln2.bias", std::span<float>(layer.ln2_bias), false);
  }
  fn("final_norm.gain", std::span<float>(final_gain_), true);
  fn("final_norm.bias", std::span<float>(final_bias_), false);
}

template <typename Fn>
void ToyLM::for_each_tensor(Fn&& fn) const {
  const_cast<ToyLM*>(this)->for_each_tensor(
      [&](const std::string& name, std::span<float> values, bool is_gain) {
        fn(name, std::span<const float>(values), is_gain);
      });
}

ToyLM ToyLM::init_from_seed(const ToyLMConfig& config) {
  ToyLM model(config);
  SplitMix64 rng(config.seed);
  model.for_each_tensor([&](const std::string&, std::span<float> values, bool is_gain) {
    fill_uniform(rng, values, is_gain ? 1.0f : 0.0f);
  });
  return model;
}

std::size_t ToyLM::weight_count() const noexcept {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, std::span<const float> v, bool) { n += v.size(); });
  return n;
}

std::uint64_t ToyLM::weights_checksum() const {
  std::string bytes;
  bytes.reserve(weight_count() * sizeof(float));
  for_each_tensor([&](const std::string&, std::span<const float> v, bool) {
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  });
  return crc64(bytes);
}

void ToyLM::check_tokens(std::span<const int> tokens) const {
  if (tokens.empty()) throw Error(ErrorCode::InvalidArgument, "empty token sequence");
  if (tokens.size() > static_cast<std::size_t>(config_.max_context)) {
    throw Error(ErrorCode::ContextOverflow, std::to_string(tokens.size()) +
                                               " tokens exceed context of " +
                                               std::to_string(config_.max_context));
  }
  for (const int t : tokens) {
    if (t < 0 || t >= config_.vocab_size) {
      throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(t) + " out of range");
    }
  }
}

ForwardTrace ToyLM::forward_traced(std::span<const int> tokens) const {
  return forward_impl(tokens, true);
}

ForwardTrace ToyLM::forward_impl(std::span<const int> tokens, bool capture) const {
  check_tokens(tokens);
  const std::size_t n = tokens.size();
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t hd = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  ForwardTrace trace;
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto te = token_embedding_.row(tokens[i]);
    const auto pe = position_embedding_.row(i);
    auto xr = x.row(i);
    for (std::size_t c = 0; c < d; ++c) xr[c] = te[c] + pe[c];
  }

  Matrix h(n, d), q(n, d), k(n, d), v(n, d), attn(n, d), proj(n, d);
  std::vector<float> ff(config_.d_ff), scores;
  for (const auto& layer : layers_) {
    Matrix norm1(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      layer_norm(x.row(i), layer.ln1_gain, layer.ln1_bias, norm1.row(i), h.row(i));
      matvec(h.row(i), layer.wq, q.row(i));
      matvec(h.row(i), layer.wk, k.row(i));
      matvec(h.row(i), layer.wv, v.row(i));
    }
    if (capture) trace.normalized.push_back(std::move(norm1));

    std::vector<Matrix> probs;
    if (capture) probs.assign(heads, Matrix(n, n));
    for (std::size_t hh = 0; hh < heads; ++hh) {
      const std::size_t off = hh * hd;
      for (std::size_t i = 0; i < n; ++i) {
        scores.assign(i + 1, 0.0f);
        for (std::size_t j = 0; j <= i; ++j) {
          float s = 0.0f;
          for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
          scores[j] = s * scale;
        }
        softmax(scores);
        for (std::size_t c = 0; c < hd; ++c) attn(i, off + c) = 0.0f;
        for (std::size_t j = 0; j <= i; ++j) {
          if (capture) probs[hh](i, j) = scores[j];
          for (std::size_t c = 0; c < hd; ++c) attn(i, off + c) += scores[j] * v(j, off + c);
        }
      }
    }
    if (capture) trace.attention.push_back(std::move(probs));

    Matrix norm2(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      matvec(attn.row(i), layer.wo, proj.row(i));
      auto xr = x.row(i);
      for (std::size_t c = 0; c < d; ++c) xr[c] += proj(i, c);

      layer_norm(x.row(i), layer.ln2_gain, layer.ln2_bias, norm2.row(i), h.row(i));
      matvec(h.row(i), layer.ff1, ff);
      for (float& f : ff) f = gelu(f);
      matvec(ff, layer.ff2, proj.row(i));
      for (std::size_t c = 0; c < d; ++c) xr[c] += proj(i, c);
    }
    if (capture) trace.normalized.push_back(std::move(norm2));
  }

  Matrix normf(n, d);
  trace.hidden = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    layer_norm(x.row(i), final_gain_, final_bias_, normf.row(i), trace.hidden.row(i));
  }
  if (capture) trace.normalized.push_back(std::move(normf));
  return trace;
}

Matrix ToyLM::forward_hidden(std::span<const int> tokens) const {
  return forward_impl(tokens, false).hidden;
}

std::vector<float> ToyLM::logits(std::span<const float> hidden_row) const {
  std::vector<float> out(config_.vocab_size);
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = static_cast<float>(dot(hidden_row, token_embedding_.row(t)));
  }
  return out;
}

// Key/value cache for one decoding session.
class ToyLM::DecodeState {
 public:
  explicit DecodeState(const ToyLM& model) : m_(model) {
    const std::size_t d = m_.config_.d_model;
    const std::size_t ctx = m_.config_.max_context;
    keys_.assign(m_.layers_.size(), Matrix(ctx, d));
    values_.assign(m_.layers_.size(), Matrix(ctx, d));
    x_.resize(d);
    h_.resize(d);
    scratch_.resize(d);
    q_.resize(d);
    attn_.resize(d);
    proj_.resize(d);
    ff_.resize(m_.config_.d_ff);
  }

  std::size_t length() const noexcept { return len_; }

  // Appends one token and returns its final hidden row.
  std::vector<float> step(int token) {
    const auto& cfg = m_.config_;
    if (len_ >= static_cast<std::size_t>(cfg.max_context)) {
      throw Error(ErrorCode::ContextOverflow, "decode state is full");
    }
    const std::size_t d = cfg.d_model;
    const std::size_t hd = d / cfg.n_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    const std::size_t pos = len_;

    const auto te = m_.token_embedding_.row(token);
    const auto pe = m_.position_embedding_.row(pos);
    for (std::size_t c = 0; c < d; ++c) x_[c] = te[c] + pe[c];

    for (std::size_t l = 0; l < m_.layers_.size(); ++l) {
      const auto& layer = m_.layers_[l];
      layer_norm(x_, layer.ln1_gain, layer.ln1_bias, scratch_, h_);
      matvec(h_, layer.wq, q_);
      matvec(h_, layer.wk, keys_[l].row(pos));
      matvec(h_, layer.wv, values_[l].row(pos));

      for (std::size_t hh = 0; hh < static_cast<std::size_t>(cfg.n_heads); ++hh) {
        const std::size_t off = hh * hd;
        scores_.assign(pos + 1, 0.0f);
        for (std::size_t j = 0; j <= pos; ++j) {
          float s = 0.0f;
          for (std::size_t c = 0; c < hd; ++c) s += q_[off + c] * keys_[l](j, off + c);
          scores_[j] = s * scale;
        }
        softmax(scores_);
        for (std::size_t c = 0; c < hd; ++c) attn_[off + c] = 0.0f;
        for (std::size_t j = 0; j <= pos; ++j) {
          for (std::size_t c = 0; c < hd; ++c) attn_[off + c] += scores_[j] * values_[l](j, off + c);
        }
      }
      matvec(attn_, layer.wo, proj_);
      for (std::size_t c = 0; c < d; ++c) x_[c] += proj_[c];

      layer_norm(x_, layer.ln2_gain, layer.ln2_bias, scratch_, h_);
      matvec(h_, layer.ff1, ff_);
      for (float& f : ff_) f = gelu(f);
      matvec(ff_, layer.ff2, proj_);
      for (std::size_t c = 0; c < d; ++c) x_[c] += proj_[c];
    }
    std::vector<float> out(d);
    layer_norm(x_, m_.final_gain_, m_.final_bias_, scratch_, out);
    ++len_;
    return out;
  }

 private:
  const ToyLM& m_;
  std::vector<Matrix> keys_, values_;
  std::vector<float> x_, h_, scratch_, q_, attn_, proj_, ff_, scores_;
  std::size_t len_ = 0;
};

Matrix ToyLM::forward_hidden_incremental(std::span<const int> tokens) const {
  check_tokens(tokens);
  DecodeState state(*this);
  Matrix out(tokens.size(), config_.d_model);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto row = state.step(tokens[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

TokenSequence ToyLM::generate(std::span<const int> prompt, const GenConfig& cfg) const {
  cfg.validate();
  if (cfg.temperature != 0.0) {
    throw Error(ErrorCode::UnsupportedTemperature, "only greedy decoding (temperature 0) is supported");
  }
  if (cfg.n_choices != 1) throw Error(ErrorCode::InvalidConfig, "n_choices must be 1");
  check_tokens(prompt);
  if (prompt.size() + static_cast<std::size_t>(cfg.max_tokens) >
      static_cast<std::size_t>(config_.max_context)) {
    throw Error(ErrorCode::ContextOverflow,
                std::to_string(prompt.size()) + " prompt tokens + " +
                    std::to_string(cfg.max_tokens) + " new tokens exceed context of " +
                    std::to_string(config_.max_context));
  }

  DecodeState state(*this);
  std::vector<float> hidden;
  for (const int t : prompt) hidden = state.step(t);

  TokenSequence generated;
  std::string text;
  for (int step = 0; step < cfg.max_tokens; ++step) {
    auto lg = logits(hidden);
    apply_frequency_penalty(lg, generated, cfg.frequency_penalty);
    const int next = greedy_pick(lg);
    if (next == kEosToken) break;
    generated.push_back(next);
    if (next < 256) text.push_back(static_cast<char>(next));

    bool stopped = false;
    for (const auto& stop : cfg.stop_sequences) {
      if (!stop.empty() && text.ends_with(stop)) {
        std::size_t bytes = stop.size();
        while (bytes > 0) {
          if (generated.back() < 256) --bytes;
          generated.pop_back();
        }
        stopped = true;
        break;
      }
    }
    if (stopped) break;
    if (step + 1 < cfg.max_tokens) hidden = state.step(next);
  }
  return generated;
}

void ToyLM::save_weights(const std::filesystem::path& path) const {
  VectorContainer c;
  c.role = ContainerRole::Weights;
  c.dim = static_cast<std::uint32_t>(config_.d_model);
  c.values.reserve(weight_count());
  for_each_tensor([&](const std::string& name, std::span<const float> v, bool) {
    for (std::size_t r = 0; r < v.size() / c.dim; ++r) c.ids.push_back(name + "/" + std::to_string(r));
    c.values.insert(c.values.end(), v.begin(), v.end());
  });
  write_container(path, c);
}

ToyLM ToyLM::load_weights(const ToyLMConfig& config, const std::filesystem::path& path) {
  ToyLM model(config);
  const VectorContainer c = read_container(path);
  if (c.role != ContainerRole::Weights) throw Error(ErrorCode::FormatError, "container is not a weights file");
  if (c.dim != static_cast<std::uint32_t>(config.d_model) || c.values.size() != model.weight_count()) {
    throw Error(ErrorCode::FormatError, "weights file does not match the model configuration");
  }
  std::size_t offset = 0;
  model.for_each_tensor([&](const std::string& name, std::span<float> v, bool) {
    const std::string expected = name + "/0";
    if (c.ids[offset / c.dim] != expected) {
      throw Error(ErrorCode::FormatError, "expected tensor " + expected + ", found " + c.ids[offset / c.dim]);
    }
    std::copy_n(c.values.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.begin());
    offset += v.size();
  });
  return model;
}

}  // namespace rite
