#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "se/data.hpp"
#include "se/discriminator.hpp"
#include "se/generator.hpp"
#include "se/metrics.hpp"
#include "se/stream.hpp"

namespace se {

struct TrainConfig {
  double lr = 5e-5;
  Index batch_size = 1;
  Index max_epochs = 20;
  Index patience = 3;
  std::string phase = "pretrain";
  double s_target = 1.0;
  Index d_steps_per_g = 2;
  std::uint64_t seed = 0;
  Index d_warmup_steps = 64;
  double d_lr = 1e-3;
  double finetune_lr_scale = 0.1;
  double grad_clip = 5.0;

  void validate() const {
    SE_CHECK(lr > 0, "lr must be > 0, got ", lr);
    SE_CHECK(batch_size == 1, "only batch_size=1 (one utterance per step) is supported, got ",
             batch_size);
    SE_CHECK(max_epochs >= 1, "max_epochs must be >= 1, got ", max_epochs);
    SE_CHECK(patience >= 1, "patience must be >= 1, got ", patience);
    SE_CHECK(phase == "pretrain" || phase == "finetune", "phase must be pretrain or finetune");
    SE_CHECK(s_target >= 0.0 && s_target <= 1.0, "target score s must be in [0, 1], got ",
             s_target);
    SE_CHECK(d_steps_per_g >= 1, "d_steps_per_g must be >= 1, got ", d_steps_per_g);
    SE_CHECK(d_warmup_steps >= 0, "d_warmup_steps must be >= 0");
    SE_CHECK(d_lr > 0, "d_lr must be > 0, got ", d_lr);
    SE_CHECK(finetune_lr_scale > 0, "finetune_lr_scale must be > 0");
    SE_CHECK(grad_clip > 0, "grad_clip must be > 0");
  }
};

struct EpochRecord {
  Index epoch = 0;
  double l1 = 0;
  double d_loss = 0;
  double g_loss = 0;
  double val_q = 0;
  double wall_s = 0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  void add(EpochRecord r) {
    SE_CHECK(records.empty() || r.epoch > records.back().epoch,
             "epochs must strictly increase, got ", r.epoch, " after ", records.back().epoch);
    for (double v : {r.l1, r.d_loss, r.g_loss, r.val_q, r.wall_s}) {
      SE_CHECK(std::isfinite(v), "non-finite value in training log at epoch ", r.epoch);
    }
    records.push_back(r);
  }

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,l1_loss,d_loss,g_loss,val_q,wall_s\n";
    for (const EpochRecord& r : records) {
      os << r.epoch << "," << r.l1 << "," << r.d_loss << "," << r.g_loss << "," << r.val_q << ","
         << r.wall_s << "\n";
    }
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    SE_CHECK(out.good(), "cannot write training log ", path);
    out << to_csv();
    SE_CHECK(out.good(), "write failed for training log ", path);
  }
};

// One utterance, fully prepared for training: network input, loss targets,
// and the waveform context needed to score enhanced audio.
template <typename S>
struct TrainUtterance {
  std::string id;
  Tensor<S> noisy_compressed;
  Tensor<S> noisy_linear;
  Tensor<S> clean_compressed;
  Spectrogram<S> noisy_spec;
  Waveform<S> clean_trim;
  Waveform<S> noisy_trim;
};

template <typename S>
Tensor<S> tensor_from_matrix(const MatrixRM<S>& m) {
  Tensor<S> t({m.rows(), m.cols()});
  t.mat() = m;
  return t;
}

// Analysis drops the tail that never fills a window; waveform references are
// trimmed to the covered span so scores compare like with like.
template <typename S>
TrainUtterance<S> prepare_utterance(std::string id, const Waveform<S>& noisy,
                                    const Waveform<S>& clean, const FrameParams<S>& p) {
  SE_CHECK(noisy.length() == clean.length(), "utterance ", id, ": noisy length ", noisy.length(),
           " vs clean ", clean.length());
  TrainUtterance<S> u;
  u.id = std::move(id);
  u.noisy_spec = stft(noisy, p);
  const Spectrogram<S> clean_spec = stft(clean, p);
  u.noisy_linear = tensor_from_matrix<S>(u.noisy_spec.mag);
  u.noisy_compressed = tensor_from_matrix<S>(compress(u.noisy_spec).mag);
  u.clean_compressed = tensor_from_matrix<S>(compress(clean_spec).mag);
  const Index covered = (u.noisy_spec.num_frames() - 1) * p.hop + p.window_len;
  u.clean_trim.sample_rate = clean.sample_rate;
  u.clean_trim.samples = clean.samples.head(covered);
  u.noisy_trim.sample_rate = noisy.sample_rate;
  u.noisy_trim.samples = noisy.samples.head(covered);
  return u;
}

template <typename S>
std::vector<TrainUtterance<S>> load_utterances(const std::vector<ManifestEntry>& entries,
                                               const FrameParams<S>& p) {
  SE_CHECK(!entries.empty(), "empty dataset");
  std::vector<TrainUtterance<S>> utts;
  for (const ManifestEntry& e : entries) {
    utts.push_back(
        prepare_utterance<S>(e.id, read_wav<S>(e.noisy_path), read_wav<S>(e.clean_path), p));
  }
  return utts;
}

// Linear-domain enhanced magnitude from the raw network output.
template <typename S>
Tensor<S> enhanced_linear(const Tensor<S>& gen_out, const Tensor<S>& noisy_linear,
                          HeadMode mode) {
  Tensor<S> y(gen_out.shape());
  if (mode == HeadMode::kMask) {
    y.flat() = gen_out.flat() * noisy_linear.flat();
  } else {
    y.flat() = gen_out.flat().exp() - S(1);
  }
  return y;
}

// Compressed-domain enhanced magnitude (the loss and discriminator domain).
template <typename S>
Tensor<S> enhanced_compressed_value(const Tensor<S>& gen_out, const Tensor<S>& noisy_linear,
                                    HeadMode mode) {
  if (mode == HeadMode::kMap) return gen_out;
  Tensor<S> y(gen_out.shape());
  y.flat() = (gen_out.flat() * noisy_linear.flat()).log1p();
  return y;
}

template <typename S>
Waveform<S> resynthesize_from_output(const Tensor<S>& gen_out, const TrainUtterance<S>& utt,
                                     HeadMode mode, const FrameParams<S>& p) {
  const Tensor<S> lin = enhanced_linear(gen_out, utt.noisy_linear, mode);
  Spectrogram<S> enh;
  enh.mag = lin.mat();
  enh.phase = utt.noisy_spec.phase;
  enh.compressed = false;
  return resynthesize(enh, utt.noisy_spec, p, utt.clean_trim.sample_rate);
}

// Mean absolute error between the enhanced and clean compressed magnitudes.
template <typename S>
Var l1_sa_loss(Tape<S>& t, Var gen_out, Var noisy_linear, Var clean_compressed, HeadMode mode) {
  return abs_mean(t, enhanced_compressed(t, gen_out, noisy_linear, mode), clean_compressed);
}

template <typename S>
std::vector<Tensor<S>> collect_grads(Tape<S>& tape, const std::vector<Var>& vars) {
  std::vector<Tensor<S>> grads;
  for (Var v : vars) {
    grads.push_back(tape.has_grad(v) ? tape.grad(v) : Tensor<S>::zeros(tape.value(v).shape()));
  }
  return grads;
}

template <typename S>
double q_for_utterance(const GeneratorConfig& gcfg, const GeneratorWeights<S>& gw,
                       const TrainUtterance<S>& utt, const MetricFn<S>& metric,
                       const FrameParams<S>& p) {
  const Tensor<S> out = generator_infer(gcfg, gw, utt.noisy_compressed);
  return metric(resynthesize_from_output(out, utt, gcfg.head_mode, p), utt.clean_trim);
}

template <typename S>
double mean_val_q(const GeneratorConfig& gcfg, const GeneratorWeights<S>& gw,
                  const std::vector<TrainUtterance<S>>& val, const MetricFn<S>& metric,
                  const FrameParams<S>& p) {
  SE_CHECK(!val.empty(), "empty validation set");
  double acc = 0;
  for (const TrainUtterance<S>& u : val) acc += q_for_utterance(gcfg, gw, u, metric, p);
  return acc / static_cast<double>(val.size());
}

template <typename S>
double val_l1(const GeneratorConfig& gcfg, const GeneratorWeights<S>& gw,
              const std::vector<TrainUtterance<S>>& val) {
  double acc = 0;
  for (const TrainUtterance<S>& u : val) {
    const Tensor<S> out = generator_infer(gcfg, gw, u.noisy_compressed);
    const Tensor<S> enh = enhanced_compressed_value(out, u.noisy_linear, gcfg.head_mode);
    acc += static_cast<double>((enh.flat() - u.clean_compressed.flat()).abs().mean());
  }
  return acc / static_cast<double>(val.size());
}

// One generator step against the L1 signal-approximation loss.
template <typename S>
double pretrain_step(const GeneratorConfig& gcfg, GeneratorWeights<S>& gw,
                     const TrainUtterance<S>& utt, AdamState<S>& adam) {
  Tape<S> tape;
  const GeneratorVars gv = stage_generator(tape, gw, true);
  const Var x = tape.constant(utt.noisy_compressed);
  const Var lin = tape.constant(utt.noisy_linear);
  const Var clean = tape.constant(utt.clean_compressed);
  const Var out = generator_forward(tape, x, gv, gcfg);
  const Var loss = l1_sa_loss(tape, out, lin, clean, gcfg.head_mode);
  tape.backward(loss);
  const std::vector<Tensor<S>> grads = collect_grads(tape, generator_var_list(gv));
  adam_step(adam, gw.named_params(), grads);
  return static_cast<double>(tape.value(loss).at(0));
}

struct PretrainResult {
  TrainLog log;
  Index best_epoch = 0;
  double best_val_l1 = 0;
};

// Adam over the L1 loss with early stopping on validation loss. The best
// validation weights win; divergence aborts back to the last good weights.
template <typename S>
PretrainResult pretrain(const GeneratorConfig& gcfg, GeneratorWeights<S>& gw,
                        const std::vector<TrainUtterance<S>>& train,
                        const std::vector<TrainUtterance<S>>& val, const TrainConfig& tcfg,
                        const MetricFn<S>& metric, const FrameParams<S>& p) {
  tcfg.validate();
  gcfg.validate();
  SE_CHECK(!train.empty() && !val.empty(), "pretrain needs nonempty train and validation sets");
  AdamState<S> adam;
  adam.config.lr = static_cast<S>(tcfg.lr);
  Rng order_rng(tcfg.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  PretrainResult result;
  GeneratorWeights<S> best = gw;
  double best_val = std::numeric_limits<double>::infinity();
  Index stale = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (Index epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double train_l1 = 0;
    bool diverged = false;
    try {
      for (std::size_t i : order) train_l1 += pretrain_step(gcfg, gw, train[i], adam);
      train_l1 /= static_cast<double>(train.size());
    } catch (const Error& e) {
      log_warn("pretrain diverged at epoch ", epoch, " (", e.what(),
               "), keeping last good weights");
      diverged = true;
    }
    if (diverged) break;
    const double v_l1 = val_l1(gcfg, gw, val);
    EpochRecord r;
    r.epoch = epoch;
    r.l1 = train_l1;
    r.val_q = mean_val_q(gcfg, gw, val, metric, p);
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.add(r);
    log_info("pretrain epoch ", epoch, ": train L1 ", train_l1, ", val L1 ", v_l1, ", val Q' ",
             r.val_q);
    if (v_l1 < best_val) {
      best_val = v_l1;
      best = gw;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
      if (stale >= tcfg.patience) {
        log_info("pretrain early stop at epoch ", epoch, " (best epoch ", result.best_epoch, ")");
        break;
      }
    }
  }
  gw = best;
  result.best_val_l1 = best_val;
  return result;
}

// Everything a discriminator step needs, with the generator treated as a
// constant: the enhanced sample and its true metric label.
template <typename S>
struct DiscBatchItem {
  Tensor<S> enhanced_comp;
  Tensor<S> clean_comp;
  double q = 0;
};

template <typename S>
DiscBatchItem<S> make_disc_item(const GeneratorConfig& gcfg, const GeneratorWeights<S>& gw,
                                const TrainUtterance<S>& utt, const MetricFn<S>& metric,
                                const FrameParams<S>& p) {
  const Tensor<S> out = generator_infer(gcfg, gw, utt.noisy_compressed);
  DiscBatchItem<S> item;
  item.enhanced_comp = enhanced_compressed_value(out, utt.noisy_linear, gcfg.head_mode);
  item.clean_comp = utt.clean_compressed;
  item.q = metric(resynthesize_from_output(out, utt, gcfg.head_mode, p), utt.clean_trim);
  return item;
}

// One discriminator update: (D(y, y) - 1)^2 + (D(G(x), y) - Q')^2 on a single
// pair. Labels must respect the metric's [0, 1] range.
template <typename S>
double d_update_step(DiscriminatorWeights<S>& dw, const DiscBatchItem<S>& item,
                     AdamState<S>& adam) {
  SE_CHECK(item.q >= 0.0 && item.q <= 1.0, "Q' label ", item.q, " outside [0, 1]");
  dw.power_iterate_all();
  Tape<S> tape;
  const DiscVars dv = stage_discriminator(tape, dw, true);
  const Var enh = tape.constant(item.enhanced_comp);
  const Var clean = tape.constant(item.clean_comp);
  const Var fake = disc_forward(tape, enh, clean, dv, dw);
  const Var real = disc_forward(tape, clean, clean, dv, dw);
  const Var loss = add(tape, squared_error_mean(tape, real, tape.constant(Tensor<S>::scalar(1))),
                       squared_error_mean(tape, fake, tape.constant(Tensor<S>::scalar(
                                                          static_cast<S>(item.q)))));
  tape.backward(loss);
  const std::vector<Tensor<S>> grads = collect_grads(tape, discriminator_var_list(dv));
  adam_step(adam, dw.named_params(), grads);
  return static_cast<double>(tape.value(loss).at(0));
}

// One generator update against (D(G(x), y) - s)^2; the discriminator weights
// are constants and the gradient is norm-clipped.
template <typename S>
double g_update_step(const GeneratorConfig& gcfg, GeneratorWeights<S>& gw,
                     const DiscriminatorWeights<S>& dw, const TrainUtterance<S>& utt,
                     const TrainConfig& tcfg, AdamState<S>& adam) {
  Tape<S> tape;
  const GeneratorVars gv = stage_generator(tape, gw, true);
  const DiscVars dv = stage_discriminator(tape, dw, false);
  const Var x = tape.constant(utt.noisy_compressed);
  const Var lin = tape.constant(utt.noisy_linear);
  const Var out = generator_forward(tape, x, gv, gcfg);
  const Var enh = enhanced_compressed(tape, out, lin, gcfg.head_mode);
  const Var score = disc_forward(tape, enh, tape.constant(utt.clean_compressed), dv, dw);
  const Var loss = squared_error_mean(
      tape, score, tape.constant(Tensor<S>::scalar(static_cast<S>(tcfg.s_target))));
  tape.backward(loss);
  std::vector<Tensor<S>> grads = collect_grads(tape, generator_var_list(gv));
  clip_grad_norm(grads, static_cast<S>(tcfg.grad_clip));
  adam_step(adam, gw.named_params(), grads);
  return static_cast<double>(tape.value(loss).at(0));
}

struct FinetuneResult {
  TrainLog log;
  Index best_epoch = 0;
  double best_val_q = 0;
  double pretrained_val_q = 0;
};

// Alternating adversarial fine-tuning: a fresh discriminator is warmed up,
// then each generator step is preceded by k discriminator steps on fresh
// enhanced samples with true metric labels. The generator with the best
// validation score wins; its architecture never changes.
template <typename S>
FinetuneResult metricgan_finetune(const GeneratorConfig& gcfg, GeneratorWeights<S>& gw,
                                  const std::vector<TrainUtterance<S>>& train,
                                  const std::vector<TrainUtterance<S>>& val,
                                  const TrainConfig& tcfg, const MetricFn<S>& metric,
                                  const FrameParams<S>& p) {
  tcfg.validate();
  gcfg.validate();
  SE_CHECK(!train.empty() && !val.empty(), "finetune needs nonempty train and validation sets");

  Rng d_rng(tcfg.seed + 0x9e3779b9);
  DiscriminatorWeights<S> dw = DiscriminatorWeights<S>::init(d_rng);
  AdamState<S> d_adam;
  d_adam.config.lr = static_cast<S>(tcfg.d_lr);
  AdamState<S> g_adam;
  g_adam.config.lr = static_cast<S>(tcfg.lr * tcfg.finetune_lr_scale);

  Rng order_rng(tcfg.seed);
  std::vector<std::size_t> g_order(train.size());
  for (std::size_t i = 0; i < g_order.size(); ++i) g_order[i] = i;
  std::vector<std::size_t> d_order = g_order;
  std::size_t d_cursor = d_order.size();
  const auto next_d_utt = [&]() -> const TrainUtterance<S>& {
    if (d_cursor >= d_order.size()) {
      std::shuffle(d_order.begin(), d_order.end(), order_rng);
      d_cursor = 0;
    }
    return train[d_order[d_cursor++]];
  };

  FinetuneResult result;
  result.pretrained_val_q = mean_val_q(gcfg, gw, val, metric, p);
  GeneratorWeights<S> best = gw;
  double best_q = result.pretrained_val_q;
  result.best_val_q = best_q;

  for (Index i = 0; i < tcfg.d_warmup_steps; ++i) {
    d_update_step(dw, make_disc_item(gcfg, gw, next_d_utt(), metric, p), d_adam);
  }

  double best_d_loss = std::numeric_limits<double>::infinity();
  Index d_stale = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (Index epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::shuffle(g_order.begin(), g_order.end(), order_rng);
    double d_sum = 0, g_sum = 0;
    Index d_count = 0;
    for (std::size_t gi : g_order) {
      for (Index k = 0; k < tcfg.d_steps_per_g; ++k) {
        d_sum += d_update_step(dw, make_disc_item(gcfg, gw, next_d_utt(), metric, p), d_adam);
        ++d_count;
      }
      g_sum += g_update_step(gcfg, gw, dw, train[gi], tcfg, g_adam);
    }
    const double d_mean = d_sum / static_cast<double>(d_count);
    const double g_mean = g_sum / static_cast<double>(train.size());
    const double vq = mean_val_q(gcfg, gw, val, metric, p);
    EpochRecord r;
    r.epoch = epoch;
    r.d_loss = d_mean;
    r.g_loss = g_mean;
    r.val_q = vq;
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.add(r);
    log_info("finetune epoch ", epoch, ": d_loss ", d_mean, ", g_loss ", g_mean, ", val Q' ", vq);
    if (vq > best_q) {
      best_q = vq;
      best = gw;
      result.best_epoch = epoch;
    }
    if (d_mean < best_d_loss) {
      best_d_loss = d_mean;
      d_stale = 0;
    } else {
      ++d_stale;
      if (d_stale >= tcfg.patience) {
        log_warn("discriminator loss has not improved for ", d_stale, " epochs, continuing");
      }
    }
  }
  gw = best;
  result.best_val_q = best_q;
  return result;
}

}  // namespace se
