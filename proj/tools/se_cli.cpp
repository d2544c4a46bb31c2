#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "se/checkpoint.hpp"
#include "se/pipeline.hpp"

namespace {

using Scalar = float;

// Config file keys share names with long flags; explicitly passed flags win.
struct ConfigBinding {
  std::map<std::string, std::function<void(const std::string&)>> setters;

  void bind(const std::string& key, double& v) {
    setters[key] = [&v](const std::string& s) { v = std::stod(s); };
  }
  void bind(const std::string& key, se::Index& v) {
    setters[key] = [&v](const std::string& s) { v = std::stoll(s); };
  }
  void bind(const std::string& key, std::uint64_t& v) {
    setters[key] = [&v](const std::string& s) { v = std::stoull(s); };
  }
  void bind(const std::string& key, std::string& v) {
    setters[key] = [&v](const std::string& s) { v = s; };
  }
  void bind(const std::string& key, bool& v) {
    setters[key] = [&v](const std::string& s) {
      if (s == "1" || s == "true") {
        v = true;
      } else if (s == "0" || s == "false") {
        v = false;
      } else {
        se::fail("config value for boolean key must be 0/1/true/false, got '", s, "'");
      }
    };
  }

  void apply_file(const CLI::App& sub, const std::string& path) const {
    std::ifstream in(path);
    SE_CHECK(in.good(), "cannot read config file ", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    for (const auto& [key, value] : se::parse_kv_lines(buf.str())) {
      const auto it = setters.find(key);
      if (it == setters.end()) {
        throw CLI::ValidationError("config", se::str_cat("unknown config key '", key, "'"));
      }
      if (sub.count("--" + key) == 0) it->second(value);
    }
  }
};

struct KV {
  std::string key;
  std::string value;
};

void print_resolved(const std::string& command, const std::vector<KV>& kvs) {
  std::cout << "resolved config:\n  command = " << command << "\n";
  for (const KV& kv : kvs) std::cout << "  " << kv.key << " = " << kv.value << "\n";
  std::cout << std::flush;
}

std::vector<se::ManifestEntry> load_manifest_arg(const std::string& data) {
  namespace fs = std::filesystem;
  const fs::path p(data);
  if (fs::is_directory(p)) return se::read_manifest((p / "manifest.csv").string());
  return se::read_manifest(data);
}

std::vector<double> parse_snr_list(const std::string& s) {
  std::vector<double> snrs;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    const std::string item = s.substr(pos, end - pos);
    pos = end + 1;
    if (!item.empty()) snrs.push_back(std::stod(item));
    if (pos > s.size()) break;
  }
  SE_CHECK(!snrs.empty(), "SNR list is empty");
  return snrs;
}

se::GeneratorConfig base_config(bool toy, const std::string& mode, bool pe) {
  se::GeneratorConfig cfg = toy ? se::toy_generator_config() : se::GeneratorConfig{};
  cfg.head_mode = se::parse_head_mode(mode);
  cfg.sinusoidal_pe = pe;
  cfg.validate();
  return cfg;
}

struct DataBundle {
  std::vector<se::TrainUtterance<Scalar>> train;
  std::vector<se::TrainUtterance<Scalar>> val;
};

DataBundle load_split_data(const std::string& data, double train_frac, std::uint64_t seed,
                           const se::FrameParams<Scalar>& params) {
  const auto entries = load_manifest_arg(data);
  auto [train_e, val_e] = se::split(entries, train_frac, seed);
  DataBundle b;
  b.train = se::load_utterances<Scalar>(train_e, params);
  b.val = se::load_utterances<Scalar>(val_e, params);
  return b;
}

int run_synth_data(const std::string& out, se::Index pairs, double duration,
                   const std::string& snr_list, const std::string& noise, std::uint64_t seed,
                   bool toy) {
  const std::vector<double> snrs = parse_snr_list(snr_list);
  print_resolved("synth-data", {{"out", out},
                                {"pairs", se::str_cat(pairs)},
                                {"duration_s", se::str_cat(duration)},
                                {"snr_db", snr_list},
                                {"noise", noise},
                                {"seed", se::str_cat(seed)},
                                {"toy", toy ? "1" : "0"}});
  SE_CHECK(pairs >= 1, "need at least 1 pair, got ", pairs);
  const se::Index window = toy ? 64 : 512;
  se::Rng seed_rng(seed);
  std::vector<se::MixSpec> specs;
  for (se::Index i = 0; i < pairs; ++i) {
    se::MixSpec spec;
    spec.duration_s = duration;
    spec.snr_db = snrs[static_cast<std::size_t>(i) % snrs.size()];
    if (noise == "both") {
      spec.noise = (i % 2 == 0) ? se::NoiseType::kWhite : se::NoiseType::kPink;
    } else {
      spec.noise = se::parse_noise_type(noise);
    }
    spec.seed = seed_rng();
    specs.push_back(spec);
  }
  const auto entries = se::synth_dataset<Scalar>(specs, out, 2 * window);
  std::cout << "wrote " << entries.size() << " pairs under " << out << "\n";
  return 0;
}

int run_pretrain(const std::string& data, const std::string& out, const std::string& log_path,
                 const se::TrainConfig& tcfg, const std::string& metric_spec,
                 const std::string& mode, double train_frac, bool toy, bool pe) {
  const se::GeneratorConfig cfg = base_config(toy, mode, pe);
  const se::FrameParams<Scalar> params = se::frame_params_for<Scalar>(cfg);
  print_resolved("pretrain", {{"data", data},
                              {"out", out},
                              {"log", log_path},
                              {"lr", se::str_cat(tcfg.lr)},
                              {"epochs", se::str_cat(tcfg.max_epochs)},
                              {"patience", se::str_cat(tcfg.patience)},
                              {"seed", se::str_cat(tcfg.seed)},
                              {"metric", metric_spec},
                              {"mode", mode},
                              {"pe", pe ? "1" : "0"},
                              {"train_frac", se::str_cat(train_frac)},
                              {"toy", toy ? "1" : "0"},
                              {"params", se::str_cat(se::count_params(cfg))}});
  const DataBundle b = load_split_data(data, train_frac, tcfg.seed, params);
  const se::MetricFn<Scalar> metric = se::make_metric<Scalar>(metric_spec);
  se::Rng rng(tcfg.seed);
  se::GeneratorWeights<Scalar> weights = se::GeneratorWeights<Scalar>::init(cfg, rng);
  const se::PretrainResult result =
      se::pretrain(cfg, weights, b.train, b.val, tcfg, metric, params);
  se::save_generator_checkpoint(out, cfg, weights);
  if (!log_path.empty()) result.log.save(log_path);
  std::cout << "pretrain done: best epoch " << result.best_epoch << ", best val L1 "
            << result.best_val_l1 << ", checkpoint " << out << "\n";
  return 0;
}

int run_finetune(const std::string& ckpt, const std::string& data, const std::string& out,
                 const std::string& log_path, const se::TrainConfig& tcfg,
                 const std::string& metric_spec, double train_frac) {
  auto [cfg, weights] = se::load_generator_checkpoint<Scalar>(ckpt);
  const se::FrameParams<Scalar> params = se::frame_params_for<Scalar>(cfg);
  const se::Index params_before = se::param_count(weights.named_params());
  print_resolved("finetune", {{"ckpt", ckpt},
                              {"data", data},
                              {"out", out},
                              {"log", log_path},
                              {"lr", se::str_cat(tcfg.lr)},
                              {"finetune_lr_scale", se::str_cat(tcfg.finetune_lr_scale)},
                              {"d_lr", se::str_cat(tcfg.d_lr)},
                              {"epochs", se::str_cat(tcfg.max_epochs)},
                              {"patience", se::str_cat(tcfg.patience)},
                              {"d_steps_per_g", se::str_cat(tcfg.d_steps_per_g)},
                              {"d_warmup_steps", se::str_cat(tcfg.d_warmup_steps)},
                              {"s_target", se::str_cat(tcfg.s_target)},
                              {"grad_clip", se::str_cat(tcfg.grad_clip)},
                              {"seed", se::str_cat(tcfg.seed)},
                              {"metric", metric_spec},
                              {"train_frac", se::str_cat(train_frac)},
                              {"params", se::str_cat(params_before)}});
  const DataBundle b = load_split_data(data, train_frac, tcfg.seed, params);
  const se::MetricFn<Scalar> metric = se::make_metric<Scalar>(metric_spec);
  const se::FinetuneResult result =
      se::metricgan_finetune(cfg, weights, b.train, b.val, tcfg, metric, params);
  const se::Index params_after = se::param_count(weights.named_params());
  SE_CHECK(params_after == params_before, "parameter count changed during fine-tuning: ",
           params_before, " -> ", params_after);
  se::save_generator_checkpoint(out, cfg, weights);
  if (!log_path.empty()) result.log.save(log_path);
  std::cout << "finetune done: val Q' " << result.pretrained_val_q << " -> " << result.best_val_q
            << " (best epoch " << result.best_epoch << "), params unchanged at " << params_after
            << ", checkpoint " << out << "\n";
  return 0;
}

int run_enhance(const std::string& ckpt, const std::string& in, const std::string& out) {
  print_resolved("enhance", {{"ckpt", ckpt}, {"in", in}, {"out", out}});
  auto [cfg, weights] = se::load_generator_checkpoint<Scalar>(ckpt);
  const se::FrameParams<Scalar> params = se::frame_params_for<Scalar>(cfg);
  const se::Waveform<Scalar> noisy = se::read_wav<Scalar>(in);
  const se::Waveform<Scalar> enhanced = se::enhance_waveform(cfg, weights, noisy, params);
  se::write_wav(out, enhanced);
  std::cout << "enhanced " << noisy.length() << " samples -> " << enhanced.length()
            << " samples at " << out << "\n";
  return 0;
}

int run_stream(const std::string& ckpt, const std::string& in, const std::string& out) {
  print_resolved("stream", {{"ckpt", ckpt}, {"in", in}, {"out", out}});
  auto [cfg, weights] = se::load_generator_checkpoint<Scalar>(ckpt);
  const se::FrameParams<Scalar> params = se::frame_params_for<Scalar>(cfg);
  const se::Waveform<Scalar> noisy = se::read_wav<Scalar>(in);
  const se::Spectrogram<Scalar> nspec = se::stft(noisy, params);
  const se::Tensor<Scalar> compressed = se::tensor_from_matrix<Scalar>(se::compress(nspec).mag);
  se::StreamEnhancer<Scalar> enhancer(cfg, weights);
  const se::Index frames = compressed.dim(0);
  se::Tensor<Scalar> gen_out({frames, cfg.n_bins});
  se::Tensor<Scalar> frame({cfg.n_bins});
  for (se::Index t = 0; t < frames; ++t) {
    frame.flat() = compressed.mat().row(t).transpose().array();
    const se::Tensor<Scalar> row = enhancer.push(t, frame);
    gen_out.mat().row(t) = row.flat().matrix().transpose();
  }
  const se::Tensor<Scalar> lin =
      se::enhanced_linear(gen_out, se::tensor_from_matrix<Scalar>(nspec.mag), cfg.head_mode);
  se::Spectrogram<Scalar> enh;
  enh.mag = lin.mat();
  enh.phase = nspec.phase;
  enh.compressed = false;
  const se::Waveform<Scalar> wave = se::resynthesize(enh, nspec, params, noisy.sample_rate);
  se::write_wav(out, wave);
  std::cout << "streamed " << compressed.shape()[0] << " frames -> " << wave.length()
            << " samples at " << out << "\n";
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& metric_spec,
             const std::string& out) {
  print_resolved("eval", {{"ckpt", ckpt}, {"data", data}, {"metric", metric_spec}, {"out", out}});
  auto [cfg, weights] = se::load_generator_checkpoint<Scalar>(ckpt);
  const se::FrameParams<Scalar> params = se::frame_params_for<Scalar>(cfg);
  const auto utts = se::load_utterances<Scalar>(load_manifest_arg(data), params);
  const se::MetricFn<Scalar> metric = se::make_metric<Scalar>(metric_spec);
  const se::EvalReport<Scalar> report = se::eval_report(cfg, weights, utts, metric, params);
  if (out.empty()) {
    std::cout << report.to_csv();
  } else {
    std::ofstream f(out);
    SE_CHECK(f.good(), "cannot write report ", out);
    f << report.to_csv();
    SE_CHECK(f.good(), "write failed for report ", out);
  }
  std::cout << "mean Q' noisy " << report.mean_noisy << ", enhanced " << report.mean_enhanced
            << ", delta " << report.mean_delta << "\n";
  return 0;
}

constexpr se::Index kReferenceParams = 5953920;
constexpr double kReferenceMsPerFrame = 0.256;

int run_bench(const std::string& ckpt, se::Index frames, std::uint64_t seed) {
  print_resolved("bench",
                 {{"ckpt", ckpt}, {"frames", se::str_cat(frames)}, {"seed", se::str_cat(seed)}});
  auto [cfg, weights] = se::load_generator_checkpoint<Scalar>(ckpt);
  const se::Index n_params = se::param_count(weights.named_params());
  se::StreamEnhancer<Scalar> enhancer(cfg, weights);
  se::Rng rng(seed);
  std::uniform_real_distribution<Scalar> dist(0, 1);
  se::Tensor<Scalar> frame({cfg.n_bins});
  std::vector<double> ms(static_cast<std::size_t>(frames));
  for (se::Index t = 0; t < frames; ++t) {
    for (se::Index f = 0; f < cfg.n_bins; ++f) frame.at(f) = dist(rng);
    const auto t0 = std::chrono::steady_clock::now();
    enhancer.push(t, frame);
    const auto t1 = std::chrono::steady_clock::now();
    ms[static_cast<std::size_t>(t)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  double mean = 0;
  for (double v : ms) mean += v;
  mean /= static_cast<double>(ms.size());
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  std::cout << "params: " << n_params << " (reference model: " << kReferenceParams << ", delta "
            << (n_params - kReferenceParams) << ")\n";
  std::cout << "latency over " << frames << " frames: mean " << mean << " ms/frame, median "
            << median << " ms/frame (reference: " << kReferenceMsPerFrame << " ms/frame)\n";
  return 0;
}

int run_export_spec(const std::string& ckpt, const std::string& in, const std::string& clean,
                    const std::string& outdir) {
  print_resolved("export-spec",
                 {{"ckpt", ckpt}, {"in", in}, {"clean", clean}, {"outdir", outdir}});
  auto [cfg, weights] = se::load_generator_checkpoint<Scalar>(ckpt);
  const se::FrameParams<Scalar> params = se::frame_params_for<Scalar>(cfg);
  se::export_spec_panels(cfg, weights, se::read_wav<Scalar>(in), se::read_wav<Scalar>(clean),
                         params, outdir);
  std::cout << "wrote clean/noisy/enhanced CSV and PGM panels under " << outdir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal transformer speech enhancement with metric-driven fine-tuning"};
  app.require_subcommand(1);

  std::string config_path;

  // synth-data
  auto* sd = app.add_subcommand("synth-data", "generate a synthetic noisy/clean WAV dataset");
  std::string sd_out = "data";
  se::Index sd_pairs = 32;
  double sd_duration = 1.0;
  std::string sd_snrs = "0,5,10";
  std::string sd_noise = "both";
  std::uint64_t sd_seed = 0;
  bool sd_toy = false;
  sd->add_option("--out", sd_out, "output directory");
  sd->add_option("--pairs", sd_pairs, "number of utterance pairs");
  sd->add_option("--duration", sd_duration, "seconds per utterance");
  sd->add_option("--snr", sd_snrs, "comma-separated SNR grid in dB");
  sd->add_option("--noise", sd_noise, "white | pink | both");
  sd->add_option("--seed", sd_seed, "master seed");
  sd->add_flag("--toy", sd_toy, "tiny preset (64-sample window)");
  sd->add_option("--config", config_path, "key=value config file (flags win on conflict)");
  ConfigBinding sd_cfg;
  sd_cfg.bind("out", sd_out);
  sd_cfg.bind("pairs", sd_pairs);
  sd_cfg.bind("duration", sd_duration);
  sd_cfg.bind("snr", sd_snrs);
  sd_cfg.bind("noise", sd_noise);
  sd_cfg.bind("seed", sd_seed);
  sd_cfg.bind("toy", sd_toy);

  // shared training option state
  se::TrainConfig tcfg;
  std::string tr_data, tr_out = "model.ckpt", tr_log, tr_metric = "qsnr", tr_mode = "mask";
  std::string ft_ckpt;
  double tr_frac = 0.8;
  bool tr_toy = false, tr_pe = false;

  auto* pt = app.add_subcommand("pretrain", "L1 signal-approximation pre-training");
  pt->add_option("--data", tr_data, "dataset dir or manifest file")->required();
  pt->add_option("--out", tr_out, "output checkpoint path");
  pt->add_option("--log", tr_log, "training log CSV path");
  pt->add_option("--lr", tcfg.lr, "Adam learning rate");
  pt->add_option("--epochs", tcfg.max_epochs, "max epochs");
  pt->add_option("--patience", tcfg.patience, "early-stop patience");
  pt->add_option("--seed", tcfg.seed, "seed");
  pt->add_option("--metric", tr_metric, "qsnr | external:<cmd>");
  pt->add_option("--mode", tr_mode, "mask | map");
  pt->add_option("--train-frac", tr_frac, "train fraction of the manifest");
  pt->add_flag("--toy", tr_toy, "tiny preset architecture");
  pt->add_option("--config", config_path, "key=value config file (flags win on conflict)");
  pt->add_flag("--pe", tr_pe, "add sinusoidal positional encoding");
  ConfigBinding pt_cfg;
  pt_cfg.bind("data", tr_data);
  pt_cfg.bind("out", tr_out);
  pt_cfg.bind("log", tr_log);
  pt_cfg.bind("lr", tcfg.lr);
  pt_cfg.bind("epochs", tcfg.max_epochs);
  pt_cfg.bind("patience", tcfg.patience);
  pt_cfg.bind("seed", tcfg.seed);
  pt_cfg.bind("metric", tr_metric);
  pt_cfg.bind("mode", tr_mode);
  pt_cfg.bind("train-frac", tr_frac);
  pt_cfg.bind("toy", tr_toy);
  pt_cfg.bind("pe", tr_pe);

  auto* ft = app.add_subcommand("finetune", "adversarial fine-tuning against a quality metric");
  ft->add_option("--ckpt", ft_ckpt, "pretrained generator checkpoint")->required();
  ft->add_option("--data", tr_data, "dataset dir or manifest file")->required();
  ft->add_option("--out", tr_out, "output checkpoint path");
  ft->add_option("--log", tr_log, "training log CSV path");
  ft->add_option("--lr", tcfg.lr, "base Adam learning rate (scaled down for fine-tuning)");
  ft->add_option("--lr-scale", tcfg.finetune_lr_scale, "fine-tuning learning-rate scale");
  ft->add_option("--d-lr", tcfg.d_lr, "discriminator Adam learning rate");
  ft->add_option("--epochs", tcfg.max_epochs, "max epochs");
  ft->add_option("--patience", tcfg.patience, "discriminator-collapse warning window");
  ft->add_option("--k", tcfg.d_steps_per_g, "discriminator steps per generator step");
  ft->add_option("--warmup", tcfg.d_warmup_steps, "discriminator warm-up steps");
  ft->add_option("--s", tcfg.s_target, "generator target score in [0, 1]");
  ft->add_option("--clip", tcfg.grad_clip, "generator gradient-norm clip");
  ft->add_option("--seed", tcfg.seed, "seed");
  ft->add_option("--config", config_path, "key=value config file (flags win on conflict)");
  ft->add_option("--metric", tr_metric, "qsnr | external:<cmd>");
  ft->add_option("--train-frac", tr_frac, "train fraction of the manifest");
  ConfigBinding ft_cfg;
  ft_cfg.bind("ckpt", ft_ckpt);
  ft_cfg.bind("data", tr_data);
  ft_cfg.bind("out", tr_out);
  ft_cfg.bind("log", tr_log);
  ft_cfg.bind("lr", tcfg.lr);
  ft_cfg.bind("lr-scale", tcfg.finetune_lr_scale);
  ft_cfg.bind("d-lr", tcfg.d_lr);
  ft_cfg.bind("epochs", tcfg.max_epochs);
  ft_cfg.bind("patience", tcfg.patience);
  ft_cfg.bind("k", tcfg.d_steps_per_g);
  ft_cfg.bind("warmup", tcfg.d_warmup_steps);
  ft_cfg.bind("s", tcfg.s_target);
  ft_cfg.bind("clip", tcfg.grad_clip);
  ft_cfg.bind("seed", tcfg.seed);
  ft_cfg.bind("metric", tr_metric);
  ft_cfg.bind("train-frac", tr_frac);

  // enhance / stream / eval / bench / export-spec
  std::string io_ckpt, io_in, io_out, io_clean, io_outdir = "panels";
  auto* en = app.add_subcommand("enhance", "enhance one WAV through the batch path");
  en->add_option("--ckpt", io_ckpt, "generator checkpoint")->required();
  en->add_option("--in", io_in, "noisy input WAV")->required();
  en->add_option("--out", io_out, "enhanced output WAV")->required();

  auto* st = app.add_subcommand("stream", "enhance one WAV frame by frame");
  st->add_option("--ckpt", io_ckpt, "generator checkpoint")->required();
  st->add_option("--in", io_in, "noisy input WAV")->required();
  st->add_option("--out", io_out, "enhanced output WAV")->required();

  std::string ev_out;
  auto* ev = app.add_subcommand("eval", "score a dataset before/after enhancement");
  ev->add_option("--ckpt", io_ckpt, "generator checkpoint")->required();
  ev->add_option("--data", tr_data, "dataset dir or manifest file")->required();
  ev->add_option("--metric", tr_metric, "qsnr | external:<cmd>");
  ev->add_option("--out", ev_out, "report CSV path (stdout if omitted)");

  se::Index bench_frames = 100;
  std::uint64_t bench_seed = 0;
  auto* be = app.add_subcommand("bench", "streamed per-frame latency and parameter count");
  be->add_option("--ckpt", io_ckpt, "generator checkpoint")->required();
  be->add_option("--frames", bench_frames, "streamed frames to time (>= 10)");
  be->add_option("--seed", bench_seed, "input seed");

  auto* ex = app.add_subcommand("export-spec", "dump clean/noisy/enhanced spectrogram panels");
  ex->add_option("--ckpt", io_ckpt, "generator checkpoint")->required();
  ex->add_option("--in", io_in, "noisy input WAV")->required();
  ex->add_option("--clean", io_clean, "clean reference WAV")->required();
  ex->add_option("--outdir", io_outdir, "output directory");

  try {
    app.parse(argc, argv);
    if (bench_frames < 10 && be->parsed()) {
      throw CLI::ValidationError("--frames", "must be >= 10");
    }
    if (!config_path.empty()) {
      if (sd->parsed()) sd_cfg.apply_file(*sd, config_path);
      if (pt->parsed()) pt_cfg.apply_file(*pt, config_path);
      if (ft->parsed()) ft_cfg.apply_file(*ft, config_path);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sd->parsed()) return run_synth_data(sd_out, sd_pairs, sd_duration, sd_snrs, sd_noise, sd_seed, sd_toy);
    if (pt->parsed()) {
      tcfg.phase = "pretrain";
      return run_pretrain(tr_data, tr_out, tr_log, tcfg, tr_metric, tr_mode, tr_frac, tr_toy, tr_pe);
    }
    if (ft->parsed()) {
      tcfg.phase = "finetune";
      return run_finetune(ft_ckpt, tr_data, tr_out, tr_log, tcfg, tr_metric, tr_frac);
    }
    if (en->parsed()) return run_enhance(io_ckpt, io_in, io_out);
    if (st->parsed()) return run_stream(io_ckpt, io_in, io_out);
    if (ev->parsed()) return run_eval(io_ckpt, tr_data, tr_metric, ev_out);
    if (be->parsed()) return run_bench(io_ckpt, bench_frames, bench_seed);
    if (ex->parsed()) return run_export_spec(io_ckpt, io_in, io_clean, io_outdir);
  } catch (const se::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
