#include "divrec/nn/seq_model.hpp"

#include <algorithm>

#include "divrec/errors.hpp"
#include "divrec/nn/ops.hpp"

namespace divrec::nn {

SeqEncoderDecoder::SeqEncoderDecoder(const SeqModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.vocab_size == 0 || cfg.width == 0) throw ContractError("empty sequence model config");
  token_embedding_ = init_uniform({cfg.vocab_size, cfg.width}, cfg.width, rng);
  enc_position_ = init_uniform({cfg.max_len, cfg.width}, cfg.width, rng);
  for (std::size_t i = 0; i < cfg.layers; ++i) encoder_.emplace_back(cfg.width, cfg.ff_width, false, rng);
  bridge_ = Linear(cfg.width, cfg.width, rng);
  dec_position_ = init_uniform({cfg.max_len + 1, cfg.width}, cfg.width, rng);
  for (std::size_t i = 0; i < cfg.layers; ++i) decoder_.emplace_back(cfg.width, cfg.ff_width, true, rng);
  dec_norm_ = LayerNorm(cfg.width);
  head_ = Linear(cfg.width, cfg.vocab_size, rng);
}

Tensor SeqEncoderDecoder::encode(std::span<const std::int32_t> ids) const {
  if (ids.empty()) throw ContractError("encode: empty token sequence");
  ids = ids.first(std::min(ids.size(), cfg_.max_len));
  Tensor h = add(embedding(token_embedding_, ids), slice_rows(enc_position_, 0, ids.size()));
  for (const auto& block : encoder_) h = block.forward(h);
  return mean_rows(h);
}

Tensor SeqEncoderDecoder::decode_logits(const Tensor& emb, std::span<const std::int32_t> targets) const {
  if (emb.numel() != cfg_.width) {
    throw ShapeError("decode: embedding width " + std::to_string(emb.numel()) +
                     " does not match model width " + std::to_string(cfg_.width));
  }
  targets = targets.first(std::min(targets.size(), cfg_.max_len));
  Tensor prefix = bridge_.forward(reshape(emb, {1, cfg_.width}));
  Tensor h = prefix;
  if (!targets.empty()) h = concat_rows({prefix, embedding(token_embedding_, targets)});
  h = add(h, slice_rows(dec_position_, 0, targets.size() + 1));
  for (const auto& block : decoder_) h = block.forward(h);
  return head_.forward(dec_norm_.forward(h));
}

Tensor SeqEncoderDecoder::reconstruction_loss(const Tensor& emb, std::span<const std::int32_t> targets,
                                              std::int32_t end_id) const {
  targets = targets.first(std::min(targets.size(), cfg_.max_len));
  std::vector<std::int32_t> expected(targets.begin(), targets.end());
  expected.push_back(end_id);
  return cross_entropy(decode_logits(emb, targets), expected);
}

std::vector<std::int32_t> SeqEncoderDecoder::greedy_decode(const Tensor& emb, std::size_t max_tokens,
                                                           std::int32_t end_id) const {
  NoGradGuard guard;
  std::vector<std::int32_t> out;
  max_tokens = std::min(max_tokens, cfg_.max_len);
  while (out.size() < max_tokens) {
    Tensor logits = decode_logits(emb, out);
    const std::size_t v = logits.cols();
    auto last = logits.values().subspan((logits.rows() - 1) * v, v);
    auto best = static_cast<std::int32_t>(std::max_element(last.begin(), last.end()) - last.begin());
    if (best == end_id) break;
    out.push_back(best);
  }
  return out;
}

ParamList SeqEncoderDecoder::encoder_params() const {
  ParamList out;
  out.push_back({"token_embedding", token_embedding_});
  out.push_back({"enc_position", enc_position_});
  for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect(out, "encoder." + std::to_string(i));
  return out;
}

ParamList SeqEncoderDecoder::params() const {
  ParamList out = encoder_params();
  bridge_.collect(out, "bridge");
  out.push_back({"dec_position", dec_position_});
  for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].collect(out, "decoder." + std::to_string(i));
  dec_norm_.collect(out, "dec_norm");
  head_.collect(out, "head");
  return out;
}

}  // namespace divrec::nn
