#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rite/types.hpp"

namespace rite {

// Byte-level vocabulary: ids 0..255 are raw bytes, followed by specials.
inline constexpr int kBosToken = 256;
inline constexpr int kEosToken = 257;
inline constexpr int kPadToken = 258;
inline constexpr int kByteVocabSize = 259;

struct ToyLMConfig {
  int vocab_size = kByteVocabSize;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_context = 512;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidConfig

  // Closed-form number of scalar weights for this configuration.
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const ToyLMConfig&, const ToyLMConfig&) = default;
};

using TokenSequence = std::vector<int>;

// [BOS] followed by one token per byte. Throws ContextOverflow when the
// result is longer than max_context.
TokenSequence byte_tokenize(std::string_view text, std::size_t max_context);

// Inverse of byte_tokenize; special tokens are dropped.
std::string byte_detokenize(std::span<const int> tokens);

// Row-major dense float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Intermediate values captured by ToyLM::forward_traced for invariant checks.
struct ForwardTrace {
  Matrix hidden;                               // [len x d_model], post final norm
  std::vector<std::vector<Matrix>> attention;  // [layer][head] -> [len x len]
  std::vector<Matrix> normalized;              // every layer norm, pre gain/bias
};

// logits[t] -= penalty * (occurrences of t in `generated`).
void apply_frequency_penalty(std::span<float> logits, std::span<const int> generated,
                             double penalty);

// Argmax; ties go to the lowest token id.
int greedy_pick(std::span<const float> logits);

// Deterministic pre-norm decoder-only transformer with seeded random
// weights. Immutable after construction; all methods are thread-safe.
class ToyLM {
 public:
  // Weights are drawn from U(-0.05, 0.05) off a splitmix64 stream seeded by
  // config.seed, in this order: token embedding, position embedding, then
  // per layer Q, K, V, O, FF1, FF2, ln1 gain, ln1 bias, ln2 gain, ln2 bias,
  // then final gain and bias. Gains are 1 + draw.
  static ToyLM init_from_seed(const ToyLMConfig& config);

  const ToyLMConfig& config() const noexcept { return config_; }

  // Final-layer, post-final-norm hidden state per position under a causal mask.
  Matrix forward_hidden(std::span<const int> tokens) const;
  ForwardTrace forward_traced(std::span<const int> tokens) const;

  // Output projection (tied to the token embedding) of one hidden row.
  std::vector<float> logits(std::span<const float> hidden_row) const;

  // Greedy decoding with a frequency penalty over tokens generated in this
  // call. Stops at max_tokens, EOS, or a stop sequence (which is dropped).
  // Returns the generated tokens only.
  TokenSequence generate(std::span<const int> prompt, const GenConfig& cfg) const;

  // Same as forward_hidden, but computed one token at a time through the
  // key/value cache that generate() uses.
  Matrix forward_hidden_incremental(std::span<const int> tokens) const;

  std::size_t weight_count() const noexcept;
  // CRC-64 over the little-endian bytes of every weight in init order.
  std::uint64_t weights_checksum() const;

  void save_weights(const std::filesystem::path& path) const;
  static ToyLM load_weights(const ToyLMConfig& config, const std::filesystem::path& path);

  friend bool operator==(const ToyLM&, const ToyLM&) = default;

 private:
  struct Layer {
    Matrix wq, wk, wv, wo;  // [d_model x d_model]
    Matrix ff1;             // [d_model x d_ff]
    Matrix ff2;             // [d_ff x d_model]
    std::vector<float> ln1_gain, ln1_bias, ln2_gain, ln2_bias;

    friend bool operator==(const Layer&, const Layer&) = default;
  };
  class DecodeState;

  explicit ToyLM(const ToyLMConfig& config);

  // Every weight tensor in init order, as (name, values).
  template <typename Fn>
  void for_each_tensor(Fn&& fn);
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const;

  void check_tokens(std::span<const int> tokens) const;
  ForwardTrace forward_impl(std::span<const int> tokens, bool capture) const;

  ToyLMConfig config_;
  Matrix token_embedding_;     // [vocab x d_model]
  Matrix position_embedding_;  // [max_context x d_model]
  std::vector<Layer> layers_;
  std::vector<float> final_gain_, final_bias_;
};

}  // namespace rite
