#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "divrec/nn/layers.hpp"

namespace divrec::nn {

struct SeqModelConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t ff_width = 128;
  std::size_t max_len = 96;
};

// Attention encoder that mean-pools token states into one sample embedding,
// and an autoregressive decoder conditioned on that embedding through a
// prefix position. Token embeddings are shared by both sides.
class SeqEncoderDecoder {
 public:
  SeqEncoderDecoder() = default;
  SeqEncoderDecoder(const SeqModelConfig& cfg, Rng& rng);

  const SeqModelConfig& config() const { return cfg_; }
  std::size_t width() const { return cfg_.width; }

  // [1, width] embedding; ids are truncated to max_len.
  Tensor encode(std::span<const std::int32_t> ids) const;
  // Logits [targets.size() + 1, vocab]: row t predicts targets[t], the last
  // row predicts the end token.
  Tensor decode_logits(const Tensor& embedding, std::span<const std::int32_t> targets) const;
  Tensor reconstruction_loss(const Tensor& embedding, std::span<const std::int32_t> targets,
                             std::int32_t end_id) const;
  std::vector<std::int32_t> greedy_decode(const Tensor& embedding, std::size_t max_tokens,
                                          std::int32_t end_id) const;

  ParamList params() const;
  ParamList encoder_params() const;

 private:
  SeqModelConfig cfg_;
  Tensor token_embedding_;  // [vocab, width]
  Tensor enc_position_;     // [max_len, width]
  Tensor dec_position_;     // [max_len + 1, width]
  std::vector<TransformerBlock> encoder_;
  Linear bridge_;
  std::vector<TransformerBlock> decoder_;
  LayerNorm dec_norm_;
  Linear head_;
};

}  // namespace divrec::nn
