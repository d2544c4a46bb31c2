#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "se/dsp.hpp"
#include "se/wav_io.hpp"

namespace se {

enum class NoiseType { kWhite, kPink };

inline const char* noise_type_name(NoiseType n) {
  return n == NoiseType::kWhite ? "white" : "pink";
}

inline NoiseType parse_noise_type(const std::string& s) {
  if (s == "white") return NoiseType::kWhite;
  if (s == "pink") return NoiseType::kPink;
  fail("unknown noise type '", s, "' (expected white or pink)");
}

// Sum of 3-6 harmonics of a random fundamental in [150, 400] Hz with 4 Hz
// amplitude modulation: enough spectral and temporal structure to separate
// from broadband noise, with zero external data.
template <typename S>
Waveform<S> pseudo_speech(double duration_s, Rng& rng, int sample_rate = kDefaultSampleRate) {
  SE_CHECK(duration_s > 0, "duration must be > 0, got ", duration_s);
  const Index n = static_cast<Index>(duration_s * sample_rate);
  SE_CHECK(n >= 2, "duration ", duration_s, " s yields under 2 samples");
  std::uniform_real_distribution<double> f0_dist(150.0, 400.0);
  std::uniform_int_distribution<int> harm_dist(3, 6);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);
  const double f0 = f0_dist(rng);
  const int harmonics = harm_dist(rng);
  std::vector<double> phases;
  for (int h = 0; h < harmonics; ++h) phases.push_back(phase_dist(rng));
  const double am_phase = phase_dist(rng);
  Waveform<S> w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  double peak = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      v += std::sin(2.0 * M_PI * f0 * (h + 1) * t + phases[static_cast<std::size_t>(h)]) /
           (h + 1);
    }
    v *= 0.55 + 0.45 * std::sin(2.0 * M_PI * 4.0 * t + am_phase);
    w.samples[i] = static_cast<S>(v);
    peak = std::max(peak, std::abs(v));
  }
  w.samples *= static_cast<S>(0.5 / peak);
  return w;
}

template <typename S>
Waveform<S> white_noise(Index n, Rng& rng, int sample_rate = kDefaultSampleRate) {
  SE_CHECK(n >= 1, "noise length must be >= 1");
  std::normal_distribution<double> dist(0.0, 0.3);
  Waveform<S> w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i) w.samples[i] = static_cast<S>(dist(rng));
  return w;
}

// White noise shaped toward 1/f by a small IIR cascade (Kellet coefficients).
template <typename S>
Waveform<S> pink_noise(Index n, Rng& rng, int sample_rate = kDefaultSampleRate) {
  Waveform<S> w = white_noise<S>(n, rng, sample_rate);
  double b0 = 0, b1 = 0, b2 = 0;
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(w.samples[i]);
    b0 = 0.99765 * b0 + x * 0.0990460;
    b1 = 0.96300 * b1 + x * 0.2965164;
    b2 = 0.57000 * b2 + x * 1.0526913;
    w.samples[i] = static_cast<S>((b0 + b1 + b2 + x * 0.1848) * 0.2);
  }
  return w;
}

// Noise is scaled so 10 log10(|clean|^2 / |alpha noise|^2) equals snr_db
// exactly, then added. A +inf target is the no-noise sentinel.
template <typename S>
std::pair<Waveform<S>, Waveform<S>> mix(const Waveform<S>& clean, const Waveform<S>& noise,
                                        double snr_db_target) {
  SE_CHECK(clean.length() == noise.length(), "mix: length mismatch ", clean.length(), " vs ",
           noise.length());
  const double clean_energy = clean.samples.template cast<double>().squaredNorm();
  SE_CHECK(clean_energy > 0, "mix: silent clean signal");
  if (snr_db_target == std::numeric_limits<double>::infinity()) {
    return {clean, clean};
  }
  SE_CHECK(std::isfinite(snr_db_target), "mix: SNR must be finite or +inf, got ", snr_db_target);
  const double noise_energy = noise.samples.template cast<double>().squaredNorm();
  SE_CHECK(noise_energy > 0, "mix: silent noise signal");
  const double alpha =
      std::sqrt(clean_energy / (noise_energy * std::pow(10.0, snr_db_target / 10.0)));
  Waveform<S> noisy;
  noisy.sample_rate = clean.sample_rate;
  noisy.samples = clean.samples + noise.samples * static_cast<S>(alpha);
  return {std::move(noisy), clean};
}

struct MixSpec {
  double duration_s = 1.0;
  NoiseType noise = NoiseType::kWhite;
  double snr_db = 5.0;
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::string id;
  std::string noisy_path;
  std::string clean_path;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

inline constexpr const char* kManifestVersionLine = "# se-manifest v1";

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  SE_CHECK(out.good(), "cannot write manifest ", path);
  out << kManifestVersionLine << "\n";
  out << "id,noisy_path,clean_path,snr_db,seed,scale\n";
  out.precision(17);
  for (const ManifestEntry& e : entries) {
    out << e.id << "," << e.noisy_path << "," << e.clean_path << "," << e.snr_db << "," << e.seed
        << "," << e.scale << "\n";
  }
  SE_CHECK(out.good(), "write failed for manifest ", path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  SE_CHECK(in.good(), "cannot read manifest ", path);
  std::string line;
  SE_CHECK(std::getline(in, line) && line == kManifestVersionLine, "manifest ", path,
           " missing version line '", kManifestVersionLine, "'");
  SE_CHECK(std::getline(in, line) && line.rfind("id,", 0) == 0, "manifest ", path,
           " missing header row");
  std::vector<ManifestEntry> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    SE_CHECK(f.size() == 6, "manifest ", path, " row with ", f.size(), " fields: ", line);
    ManifestEntry e;
    e.id = f[0];
    e.noisy_path = f[1];
    e.clean_path = f[2];
    e.snr_db = std::stod(f[3]);
    e.seed = std::stoull(f[4]);
    e.scale = std::stod(f[5]);
    entries.push_back(std::move(e));
  }
  return entries;
}

// Generates WAV pairs plus a manifest. min_len_samples guards that every
// utterance covers at least two analysis windows of the intended frame
// geometry. Emitted audio is jointly scaled into [-0.99, 0.99] when needed;
// the factor lands in the manifest.
template <typename S>
std::vector<ManifestEntry> synth_dataset(const std::vector<MixSpec>& specs,
                                         const std::string& out_dir, Index min_len_samples,
                                         int sample_rate = kDefaultSampleRate) {
  SE_CHECK(!specs.empty(), "synth_dataset: empty spec list");
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  int index = 0;
  for (const MixSpec& spec : specs) {
    SE_CHECK(static_cast<Index>(spec.duration_s * sample_rate) >= min_len_samples,
             "utterance duration ", spec.duration_s, " s is under the ", min_len_samples,
             "-sample minimum (two analysis windows)");
    Rng rng(spec.seed);
    const Waveform<S> clean_src = pseudo_speech<S>(spec.duration_s, rng, sample_rate);
    const Waveform<S> noise = spec.noise == NoiseType::kWhite
                                  ? white_noise<S>(clean_src.length(), rng, sample_rate)
                                  : pink_noise<S>(clean_src.length(), rng, sample_rate);
    auto [noisy, clean] = mix(clean_src, noise, spec.snr_db);
    const double peak =
        std::max(noisy.samples.template cast<double>().cwiseAbs().maxCoeff(),
                 clean.samples.template cast<double>().cwiseAbs().maxCoeff());
    double scale = 1.0;
    if (peak > 0.99) {
      scale = 0.99 / peak;
      noisy.samples *= static_cast<S>(scale);
      clean.samples *= static_cast<S>(scale);
    }
    ManifestEntry e;
    e.id = str_cat("utt", index);
    e.noisy_path = (std::filesystem::path(out_dir) / str_cat(e.id, "_noisy.wav")).string();
    e.clean_path = (std::filesystem::path(out_dir) / str_cat(e.id, "_clean.wav")).string();
    e.snr_db = spec.snr_db;
    e.seed = spec.seed;
    e.scale = scale;
    write_wav(e.noisy_path, noisy);
    write_wav(e.clean_path, clean);
    entries.push_back(std::move(e));
    ++index;
  }
  write_manifest((std::filesystem::path(out_dir) / "manifest.csv").string(), entries);
  return entries;
}

// Seeded shuffle, then a disjoint exhaustive cut with both sides nonempty.
inline std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split(
    const std::vector<ManifestEntry>& entries, double train_fraction, std::uint64_t seed) {
  SE_CHECK(entries.size() >= 2, "split needs at least 2 items, got ", entries.size());
  SE_CHECK(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must be in (0, 1), got ",
           train_fraction);
  std::vector<ManifestEntry> shuffled = entries;
  Rng rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const Index n = static_cast<Index>(shuffled.size());
  Index n_train = static_cast<Index>(std::llround(static_cast<double>(n) * train_fraction));
  n_train = std::clamp<Index>(n_train, 1, n - 1);
  std::vector<ManifestEntry> train(shuffled.begin(), shuffled.begin() + n_train);
  std::vector<ManifestEntry> val(shuffled.begin() + n_train, shuffled.end());
  return {std::move(train), std::move(val)};
}

}  // namespace se
