#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "se/training.hpp"

namespace se {

// Analysis parameters implied by the model's bin count, at 50% overlap.
template <typename S>
FrameParams<S> frame_params_for(const GeneratorConfig& cfg) {
  const Index window = (cfg.n_bins - 1) * 2;
  return make_frame_params<S>(window, window / 2);
}

// Full enhancement chain: analyze, compress, run the generator, recombine
// with the noisy phase, synthesize. Output covers (T-1)*hop + window samples.
template <typename S>
Waveform<S> enhance_waveform(const GeneratorConfig& cfg, const GeneratorWeights<S>& w,
                             const Waveform<S>& noisy, const FrameParams<S>& p) {
  const Spectrogram<S> nspec = stft(noisy, p);
  const Tensor<S> noisy_linear = tensor_from_matrix<S>(nspec.mag);
  const Tensor<S> noisy_compressed = tensor_from_matrix<S>(compress(nspec).mag);
  const Tensor<S> out = generator_infer(cfg, w, noisy_compressed);
  const Tensor<S> lin = enhanced_linear(out, noisy_linear, cfg.head_mode);
  Spectrogram<S> enh;
  enh.mag = lin.mat();
  enh.phase = nspec.phase;
  enh.compressed = false;
  return resynthesize(enh, nspec, p, noisy.sample_rate);
}

template <typename S>
struct EvalRow {
  std::string id;
  double q_noisy = 0;
  double q_enhanced = 0;
  double delta = 0;
};

template <typename S>
struct EvalReport {
  std::vector<EvalRow<S>> rows;
  double mean_noisy = 0;
  double mean_enhanced = 0;
  double mean_delta = 0;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "id,q_noisy,q_enhanced,delta\n";
    for (const EvalRow<S>& r : rows) {
      os << r.id << "," << r.q_noisy << "," << r.q_enhanced << "," << r.delta << "\n";
    }
    os << "mean," << mean_noisy << "," << mean_enhanced << "," << mean_delta << "\n";
    return os.str();
  }
};

// Scores every utterance before and after enhancement with the same metric.
template <typename S>
EvalReport<S> eval_report(const GeneratorConfig& cfg, const GeneratorWeights<S>& w,
                          const std::vector<TrainUtterance<S>>& utts, const MetricFn<S>& metric,
                          const FrameParams<S>& p) {
  SE_CHECK(!utts.empty(), "empty dataset");
  EvalReport<S> rep;
  for (const TrainUtterance<S>& u : utts) {
    EvalRow<S> row;
    row.id = u.id;
    row.q_noisy = metric(u.noisy_trim, u.clean_trim);
    row.q_enhanced = q_for_utterance(cfg, w, u, metric, p);
    row.delta = row.q_enhanced - row.q_noisy;
    rep.mean_noisy += row.q_noisy;
    rep.mean_enhanced += row.q_enhanced;
    rep.mean_delta += row.delta;
    rep.rows.push_back(row);
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.mean_noisy /= n;
  rep.mean_enhanced /= n;
  rep.mean_delta /= n;
  return rep;
}

// Plain-text spectrogram dump: one row per frame, one column per bin.
template <typename S>
void save_spectrogram_csv(const Spectrogram<S>& s, const std::string& path) {
  std::ofstream out(path);
  SE_CHECK(out.good(), "cannot write ", path);
  out.precision(9);
  for (Index t = 0; t < s.num_frames(); ++t) {
    for (Index f = 0; f < s.num_bins(); ++f) {
      if (f) out << ",";
      out << s.mag(t, f);
    }
    out << "\n";
  }
  SE_CHECK(out.good(), "write failed for ", path);
}

// 8-bit PGM heat map: width = frames, height = bins, bin 0 at the bottom,
// 80 dB display range below the image peak.
template <typename S>
void save_spectrogram_pgm(const Spectrogram<S>& s, const std::string& path) {
  const Index t_n = s.num_frames();
  const Index f_n = s.num_bins();
  const double peak = static_cast<double>(s.mag.maxCoeff());
  const double floor_mag = 1e-10;
  const double top_db = 20.0 * std::log10(std::max(peak, floor_mag));
  const double range_db = 80.0;
  std::ofstream out(path, std::ios::binary);
  SE_CHECK(out.good(), "cannot write ", path);
  out << "P5\n" << t_n << " " << f_n << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(t_n));
  for (Index f = f_n - 1; f >= 0; --f) {
    for (Index t = 0; t < t_n; ++t) {
      const double mag = std::max(static_cast<double>(s.mag(t, f)), floor_mag);
      const double rel = 20.0 * std::log10(mag) - top_db;
      const double unit = std::clamp(1.0 + rel / range_db, 0.0, 1.0);
      row[static_cast<std::size_t>(t)] = static_cast<unsigned char>(std::lround(unit * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  SE_CHECK(out.good(), "write failed for ", path);
}

// The three-panel comparison (clean / noisy / enhanced) as CSV + PGM files.
template <typename S>
void export_spec_panels(const GeneratorConfig& cfg, const GeneratorWeights<S>& w,
                        const Waveform<S>& noisy, const Waveform<S>& clean,
                        const FrameParams<S>& p, const std::string& outdir) {
  SE_CHECK(noisy.length() == clean.length(), "noisy length ", noisy.length(), " vs clean ",
           clean.length());
  std::filesystem::create_directories(outdir);
  const Spectrogram<S> nspec = stft(noisy, p);
  const Spectrogram<S> cspec = stft(clean, p);
  const Tensor<S> noisy_linear = tensor_from_matrix<S>(nspec.mag);
  const Tensor<S> out = generator_infer(cfg, w, tensor_from_matrix<S>(compress(nspec).mag));
  const Tensor<S> lin = enhanced_linear(out, noisy_linear, cfg.head_mode);
  Spectrogram<S> espec;
  espec.mag = lin.mat();
  espec.phase = nspec.phase;
  espec.compressed = false;
  const auto dump = [&](const Spectrogram<S>& s, const std::string& stem) {
    save_spectrogram_csv(s, outdir + "/" + stem + ".csv");
    save_spectrogram_pgm(s, outdir + "/" + stem + ".pgm");
  };
  dump(cspec, "clean");
  dump(nspec, "noisy");
  dump(espec, "enhanced");
}

}  // namespace se
