#include "divrec/gan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "divrec/errors.hpp"
#include "divrec/nn/checkpoint.hpp"
#include "divrec/nn/ops.hpp"
#include "divrec/nn/optim.hpp"
#include "divrec/util/hash.hpp"
#include "divrec/util/log.hpp"

namespace divrec::gan {

using prompt::kEos;

GanState init_gan(const GanConfig& cfg, std::size_t vocab_size, std::size_t n_classes) {
  cfg.div.validate();
  if (n_classes < 2) throw ContractError("adversarial training needs at least two classes");
  if (cfg.batch_size == 0 || cfg.disc_steps == 0 || cfg.gen_steps == 0) {
    throw ContractError("batch_size, disc_steps and gen_steps must be positive");
  }
  GanState s;
  s.cfg = cfg;
  s.cfg.model.vocab_size = vocab_size;
  s.n_classes = n_classes;
  nn::Rng rng(util::mix64(cfg.seed ^ 0x67616eULL));
  s.generator = nn::SeqEncoderDecoder(s.cfg.model, rng);
  s.discriminator = nn::Mlp3(s.cfg.model.width, cfg.disc_hidden1, cfg.disc_hidden2, n_classes, rng);
  return s;
}

EncodedBatch encode_batch(const GanState& state, const RecordRefs& records) {
  if (records.empty()) throw ContractError("encode_batch: empty batch");
  std::vector<nn::Tensor> rows;
  EncodedBatch out;
  rows.reserve(records.size());
  for (const auto* r : records) {
    rows.push_back(state.generator.encode(r->prompt.ids));
    out.class_ids.push_back(r->class_id);
  }
  out.embeddings = nn::concat_rows(rows);
  return out;
}

div::EmbeddingBatch to_embedding_batch(const EncodedBatch& encoded, const RecordRefs& records) {
  div::EmbeddingBatch b;
  const std::size_t d = encoded.embeddings.cols();
  auto v = encoded.embeddings.values();
  for (std::size_t i = 0; i < records.size(); ++i) {
    b.vectors.emplace_back(v.begin() + static_cast<long>(i * d), v.begin() + static_cast<long>((i + 1) * d));
    b.class_ids.push_back(encoded.class_ids[i]);
    b.sample_ids.push_back(records[i]->sample_id);
  }
  return b;
}

nn::Tensor discriminator_loss(const GanState& state, const nn::Tensor& embeddings,
                              std::span<const std::int32_t> class_ids) {
  for (auto c : class_ids) {
    if (c < 0 || static_cast<std::size_t>(c) >= state.n_classes) {
      throw IndexError("class id " + std::to_string(c) + " outside [0, " + std::to_string(state.n_classes - 1) + "]");
    }
  }
  return nn::cross_entropy(state.discriminator.forward(embeddings), class_ids);
}

double discriminator_accuracy(const GanState& state, const nn::Tensor& embeddings,
                              std::span<const std::int32_t> class_ids) {
  nn::NoGradGuard guard;
  nn::Tensor logits = state.discriminator.forward(embeddings);
  const std::size_t k = logits.cols();
  auto v = logits.values();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    auto row = v.subspan(i * k, k);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    correct += best == class_ids[i];
  }
  return class_ids.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(class_ids.size());
}

GeneratorLoss generator_loss(const GanState& state, const EncodedBatch& encoded, const RecordRefs& records,
                             nn::Rng& rng, const std::vector<std::vector<std::int32_t>>& replay) {
  const auto& cfg = state.cfg;
  const std::size_t n = records.size();
  GeneratorLoss out;

  std::vector<nn::Tensor> recon;
  for (std::size_t i = 0; i < n; ++i) {
    recon.push_back(state.generator.reconstruction_loss(nn::slice_rows(encoded.embeddings, i, i + 1),
                                                        records[i]->target_ids, kEos));
  }
  nn::Tensor total = nn::scale(nn::sum(nn::concat_rows(recon)), 1.0 / static_cast<double>(n));
  out.reconstruction = total.item();

  if (!replay.empty()) {
    std::vector<nn::Tensor> parts;
    for (const auto& ids : replay) {
      if (ids.empty()) continue;
      parts.push_back(state.generator.reconstruction_loss(state.generator.encode(ids), ids, kEos));
    }
    if (!parts.empty()) {
      total = nn::add(total, nn::scale(nn::sum(nn::concat_rows(parts)), 1.0 / static_cast<double>(parts.size())));
    }
  }

  const bool constrained = cfg.div.gamma > 0.0 && (cfg.div.alpha > 0.0 || cfg.div.beta > 0.0);
  if (constrained) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (encoded.class_ids[i] != encoded.class_ids[j]) {
          pairs.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
        }
      }
    }
    if (pairs.empty()) {
      util::log_warn("generator_loss: batch has no cross-class pair; constraint term is 0");
    } else {
      if (pairs.size() > cfg.max_pairs) {
        for (std::size_t i = 0; i < cfg.max_pairs; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, pairs.size() - 1);
          std::swap(pairs[i], pairs[pick(rng)]);
        }
        pairs.resize(cfg.max_pairs);
      }
      std::vector<std::int32_t> left, right;
      for (const auto& [i, j] : pairs) {
        left.push_back(i);
        right.push_back(j);
      }
      nn::Tensor c = div::constraint_rows(nn::embedding(encoded.embeddings, left),
                                          nn::embedding(encoded.embeddings, right), cfg.div);
      out.constraint = c.item();
      out.pairs = pairs.size();
      total = nn::add(total, nn::scale(c, cfg.div.gamma));
    }
  }

  if (cfg.confusion && cfg.confusion_weight > 0.0) {
    nn::Tensor conf = nn::scale(nn::mean(nn::log_softmax_rows(state.discriminator.forward(encoded.embeddings))), -1.0);
    out.confusion = conf.item();
    total = nn::add(total, nn::scale(conf, cfg.confusion_weight));
  }
  out.total = total;
  return out;
}

GanOptimizers make_optimizers(const GanState& state) {
  return {nn::Adam(state.generator_params(), {.lr = state.cfg.lr_generator}),
          nn::Adam(state.discriminator_params(), {.lr = state.cfg.lr_discriminator})};
}

double discriminator_step(GanState& state, GanOptimizers& opt, const EncodedBatch& encoded) {
  opt.discriminator.zero_grad();
  nn::Tensor loss = discriminator_loss(state, encoded.embeddings.detach(), encoded.class_ids);
  if (!std::isfinite(loss.item())) throw NumericError("discriminator loss became non-finite");
  nn::backward(loss);
  opt.discriminator.step();
  return loss.item();
}

GeneratorLoss generator_step(GanState& state, GanOptimizers& opt, const EncodedBatch& encoded,
                             const RecordRefs& records, nn::Rng& rng,
                             const std::vector<std::vector<std::int32_t>>& replay) {
  opt.generator.zero_grad();
  GeneratorLoss gl = generator_loss(state, encoded, records, rng, replay);
  if (!std::isfinite(gl.total.item())) throw NumericError("generator loss became non-finite");
  nn::backward(gl.total);
  opt.generator.step();
  opt.discriminator.zero_grad();
  return gl;
}

RecordRefs flatten(const std::vector<std::vector<attr::AugmentedRecord>>& corpora) {
  RecordRefs refs;
  for (const auto& c : corpora) {
    for (const auto& r : c) refs.push_back(&r);
  }
  return refs;
}

div::EmbeddingBatch probe_embeddings(const GanState& state, const RecordRefs& records) {
  nn::NoGradGuard guard;
  return to_embedding_batch(encode_batch(state, records), records);
}

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot take(const nn::ParamList& params) {
  Snapshot s;
  for (const auto& p : params) s.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return s;
}

void restore(const Snapshot& s, const nn::ParamList& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Tensor t = params[i].tensor;
    std::copy(s[i].begin(), s[i].end(), t.mutable_values().begin());
  }
}

void check_finite(double v, const char* what, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " became non-finite in epoch " + std::to_string(epoch));
  }
}

double probe_accuracy(const GanState& state, const RecordRefs& refs) {
  nn::NoGradGuard guard;
  auto enc = encode_batch(state, refs);
  return discriminator_accuracy(state, enc.embeddings, enc.class_ids);
}

void prune_checkpoints(const std::filesystem::path& dir, std::size_t current, std::size_t keep) {
  if (keep == 0 || current <= keep) return;
  for (std::size_t e = 1; e + keep <= current; ++e) {
    std::filesystem::remove_all(dir / ("epoch_" + std::to_string(e)));
  }
}

}  // namespace

std::vector<RecordRefs> epoch_batches(const std::vector<std::vector<attr::AugmentedRecord>>& corpora,
                                      const RecordRefs& flat, const GanConfig& cfg, nn::Rng& rng) {
  std::vector<RecordRefs> out;
  std::size_t n_hist = corpora.front().size();
  for (const auto& c : corpora) n_hist = std::min(n_hist, c.size());
  if (!cfg.group_variants || n_hist == 0) {
    std::vector<std::size_t> idx(flat.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t b = 0; b < idx.size(); b += cfg.batch_size) {
      RecordRefs batch;
      for (std::size_t i = b; i < std::min(idx.size(), b + cfg.batch_size); ++i) batch.push_back(flat[idx[i]]);
      out.push_back(std::move(batch));
    }
    return out;
  }
  std::vector<std::size_t> hist(n_hist);
  std::iota(hist.begin(), hist.end(), 0);
  std::shuffle(hist.begin(), hist.end(), rng);
  const std::size_t per_batch = std::max<std::size_t>(1, cfg.batch_size / corpora.size());
  for (std::size_t b = 0; b < hist.size(); b += per_batch) {
    RecordRefs batch;
    for (std::size_t i = b; i < std::min(hist.size(), b + per_batch); ++i) {
      for (const auto& c : corpora) batch.push_back(&c[hist[i]]);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

double best_probe_accuracy(const TrainResult& result, std::size_t within) {
  double best = 0.0;
  for (std::size_t e = 0; e < std::min(within, result.epochs.size()); ++e) {
    best = std::max(best, result.epochs[e].probe_accuracy);
  }
  return best;
}

TrainResult train_gan(GanState& state, const GanData& data, const std::filesystem::path& checkpoint_dir,
                      const std::function<void(const EpochLog&)>& on_epoch) {
  const auto& cfg = state.cfg;
  cfg.div.validate();
  if (data.train.size() != state.n_classes || (!data.probe.empty() && data.probe.size() != state.n_classes)) {
    throw ContractError("expected " + std::to_string(state.n_classes) + " corpora for adversarial training");
  }
  const RecordRefs train_refs = flatten(data.train);
  const RecordRefs probe_refs = data.probe.empty() ? train_refs : flatten(data.probe);
  if (train_refs.empty()) throw ContractError("adversarial training corpus is empty");

  nn::Rng rng(util::mix64(cfg.seed ^ 0x747261696eULL));
  const auto gen_params = state.generator_params();
  const auto disc_params = state.discriminator_params();
  GanOptimizers opt = make_optimizers(state);
  nn::Adam& g_opt = opt.generator;

  TrainResult result;
  result.baseline = div::batch_diversity_report(probe_embeddings(state, probe_refs));
  result.baseline_accuracy = probe_accuracy(state, probe_refs);

  const auto all_params = nn::concat(gen_params, disc_params);
  Snapshot good = take(all_params);
  std::size_t epoch_in_run = 0;
  try {
    // Title autoencoder warm-up.
    std::vector<std::size_t> order(data.titles.size());
    for (std::size_t e = 0; e < cfg.ae_epochs && !order.empty(); ++e) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        g_opt.zero_grad();
        std::vector<nn::Tensor> parts;
        for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) {
          const auto& ids = data.titles[order[i]];
          if (!ids.empty()) parts.push_back(state.generator.reconstruction_loss(state.generator.encode(ids), ids, kEos));
        }
        if (parts.empty()) continue;
        nn::Tensor loss = nn::scale(nn::sum(nn::concat_rows(parts)), 1.0 / static_cast<double>(parts.size()));
        check_finite(loss.item(), "autoencoder loss", 0);
        nn::backward(loss);
        g_opt.step();
      }
    }
    if (cfg.ae_epochs > 0) good = take(all_params);

    double best_js = result.baseline.mean("js");
    std::size_t stale = 0;
    for (epoch_in_run = 1; epoch_in_run <= cfg.epochs; ++epoch_in_run) {
      const auto batches_of_epoch = epoch_batches(data.train, train_refs, cfg, rng);
      EpochLog log;
      std::size_t batches = 0;
      for (const auto& batch : batches_of_epoch) {
        EncodedBatch enc = encode_batch(state, batch);

        for (std::size_t s = 0; s < cfg.disc_steps; ++s) {
          log.loss_discriminator += discriminator_step(state, opt, enc) / static_cast<double>(cfg.disc_steps);
        }
        for (std::size_t s = 0; s < cfg.gen_steps; ++s) {
          if (s > 0) enc = encode_batch(state, batch);
          std::vector<std::vector<std::int32_t>> replay;
          for (std::size_t r = 0; r < cfg.title_replay && !data.titles.empty(); ++r) {
            replay.push_back(data.titles[std::uniform_int_distribution<std::size_t>(0, data.titles.size() - 1)(rng)]);
          }
          const GeneratorLoss gl = generator_step(state, opt, enc, batch, rng, replay);
          const double w = 1.0 / static_cast<double>(cfg.gen_steps);
          log.loss_generator += gl.total.item() * w;
          log.reconstruction += gl.reconstruction * w;
          log.constraint += gl.constraint * w;
        }
        ++batches;
      }
      const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
      log.loss_generator /= nb;
      log.loss_discriminator /= nb;
      log.reconstruction /= nb;
      log.constraint /= nb;
      log.epoch = ++state.epoch;
      log.probe = div::batch_diversity_report(probe_embeddings(state, probe_refs));
      log.probe_accuracy = probe_accuracy(state, probe_refs);
      state.trained = true;
      good = take(all_params);
      result.epochs.push_back(log);
      if (on_epoch) on_epoch(log);
      if (!checkpoint_dir.empty()) {
        save_gan(checkpoint_dir / ("epoch_" + std::to_string(state.epoch)), state);
        prune_checkpoints(checkpoint_dir, state.epoch, cfg.keep_checkpoints);
      }

      const double js = log.probe.mean("js");
      if (js - best_js < cfg.min_improvement) {
        ++stale;
      } else {
        stale = 0;
      }
      best_js = std::max(best_js, js);
      if (cfg.early_stop && stale >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    }
  } catch (const NumericError& e) {
    restore(good, all_params);
    std::string where = checkpoint_dir.empty()
                            ? std::string("in-memory state of epoch ") + std::to_string(state.epoch)
                            : (checkpoint_dir / ("epoch_" + std::to_string(state.epoch))).string();
    throw NumericError(std::string(e.what()) + " in epoch " + std::to_string(epoch_in_run) + "; restored last good state (" + where + ")");
  }
  return result;
}

std::vector<std::int32_t> reconstruct_ids(const GanState& state, std::span<const std::int32_t> ids) {
  if (ids.empty()) return {};
  nn::NoGradGuard guard;
  return state.generator.greedy_decode(state.generator.encode(ids), 20, kEos);
}

std::string reconstruct(const GanState& state, const prompt::Tokenizer& tok, const std::string& title) {
  if (!state.trained) util::log_warn("reconstruct: generator has not been trained");
  const auto ids = tok.encode(title);
  return tok.decode(reconstruct_ids(state, ids), true);
}

double reconstruction_accuracy(const GanState& state, const std::vector<std::vector<std::int32_t>>& sequences) {
  std::size_t correct = 0, total = 0;
  for (const auto& seq : sequences) {
    const auto out = reconstruct_ids(state, seq);
    for (std::size_t i = 0; i < seq.size(); ++i) correct += i < out.size() && out[i] == seq[i];
    total += seq.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void save_gan(const std::filesystem::path& dir, const GanState& state) {
  std::filesystem::create_directories(dir);
  const auto& c = state.cfg;
  nlohmann::json meta{{"version", 1},
                      {"vocab_size", c.model.vocab_size},
                      {"width", c.model.width},
                      {"layers", c.model.layers},
                      {"ff_width", c.model.ff_width},
                      {"max_len", c.model.max_len},
                      {"disc_hidden1", c.disc_hidden1},
                      {"disc_hidden2", c.disc_hidden2},
                      {"n_classes", state.n_classes},
                      {"epoch", state.epoch},
                      {"trained", state.trained},
                      {"alpha", c.div.alpha},
                      {"beta", c.div.beta},
                      {"gamma", c.div.gamma},
                      {"paper_literal_sign", c.div.paper_literal_sign}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
  nn::save_checkpoint(dir / "generator.json", state.generator_params());
  nn::save_checkpoint(dir / "discriminator.json", state.discriminator_params());
}

GanState load_gan(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("no generator checkpoint in " + dir.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }
  GanConfig cfg;
  cfg.model.width = meta.at("width");
  cfg.model.layers = meta.at("layers");
  cfg.model.ff_width = meta.at("ff_width");
  cfg.model.max_len = meta.at("max_len");
  cfg.disc_hidden1 = meta.at("disc_hidden1");
  cfg.disc_hidden2 = meta.at("disc_hidden2");
  cfg.div.alpha = meta.at("alpha");
  cfg.div.beta = meta.at("beta");
  cfg.div.gamma = meta.at("gamma");
  cfg.div.paper_literal_sign = meta.at("paper_literal_sign");
  GanState s = init_gan(cfg, meta.at("vocab_size"), meta.at("n_classes"));
  s.epoch = meta.at("epoch");
  s.trained = meta.at("trained");
  nn::load_checkpoint(dir / "generator.json", s.generator_params());
  nn::load_checkpoint(dir / "discriminator.json", s.discriminator_params());
  return s;
}

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochLog>& epochs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss_g,loss_d,reconstruction,constraint,probe_accuracy,cos,kl,js,tv\n";
  out.precision(10);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss_generator << ',' << e.loss_discriminator << ',' << e.reconstruction << ','
        << e.constraint << ',' << e.probe_accuracy << ',' << e.probe.mean("cos") << ',' << e.probe.mean("kl") << ','
        << e.probe.mean("js") << ',' << e.probe.mean("tv") << '\n';
  }
}

}  // namespace divrec::gan

namespace divrec::gan {

GanData build_gan_data(const std::vector<attr::HistoryText>& train, const std::vector<attr::HistoryText>& probe,
                       const attr::AttributeSet& attrs, const prompt::PromptForge& forge,
                       const std::vector<std::string>& titles) {
  GanData data;
  data.train = attr::build_attribute_datasets(train, attrs, forge);
  if (!probe.empty()) data.probe = attr::build_attribute_datasets(probe, attrs, forge);
  for (const auto& t : titles) {
    auto ids = forge.history_ids({t});
    if (!ids.empty()) data.titles.push_back(std::move(ids));
  }
  return data;
}

}  // namespace divrec::gan
