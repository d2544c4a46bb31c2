#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "se/tensor.hpp"

namespace se {

constexpr int kDefaultSampleRate = 16000;

template <typename S>
struct Waveform {
  VectorX<S> samples;
  int sample_rate = kDefaultSampleRate;

  Index length() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(length()) / sample_rate; }
};

// Analysis frame geometry plus the window itself. fft_bins is one-sided.
template <typename S>
struct FrameParams {
  Index window_len = 512;
  Index hop = 256;
  Index fft_bins = 257;
  VectorX<S> window;
};

// Symmetric Hamming: 0.54 - 0.46 cos(2 pi n / (N - 1)). Strictly positive at
// every sample, so the overlap-add denominator never vanishes.
template <typename S>
VectorX<S> hamming_window(Index n) {
  SE_CHECK(n >= 2, "window length must be >= 2, got ", n);
  VectorX<S> w(n);
  for (Index i = 0; i < n; ++i) {
    w[i] = static_cast<S>(0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                                 static_cast<double>(n - 1)));
  }
  return w;
}

template <typename S>
FrameParams<S> make_frame_params(Index window_len = 512, Index hop = 256) {
  SE_CHECK(window_len >= 2 && window_len % 2 == 0, "window length must be even and >= 2, got ",
           window_len);
  SE_CHECK(hop >= 1, "hop must be >= 1, got ", hop);
  SE_CHECK(hop <= window_len, "hop ", hop, " must not exceed window length ", window_len);
  FrameParams<S> p;
  p.window_len = window_len;
  p.hop = hop;
  p.fft_bins = window_len / 2 + 1;
  p.window = hamming_window<S>(window_len);
  return p;
}

// Magnitude/phase pair in time-major layout (rows are frames).
template <typename S>
struct Spectrogram {
  MatrixRM<S> mag;
  MatrixRM<S> phase;
  bool compressed = false;

  Index num_frames() const { return mag.rows(); }
  Index num_bins() const { return mag.cols(); }
};

inline Index stft_frame_count(Index n_samples, Index window_len, Index hop) {
  if (n_samples < window_len) return 0;
  return (n_samples - window_len) / hop + 1;
}

template <typename S>
Spectrogram<S> stft(const Waveform<S>& w, const FrameParams<S>& p) {
  const Index n = w.length();
  SE_CHECK(n >= p.window_len, "signal too short: ", n, " samples < one window of ", p.window_len);
  SE_CHECK(p.window.size() == p.window_len, "window coefficients do not match window length");
  const Index frames = stft_frame_count(n, p.window_len, p.hop);
  const Index bins = p.fft_bins;

  Spectrogram<S> s;
  s.mag.resize(frames, bins);
  s.phase.resize(frames, bins);
  s.compressed = false;

  Eigen::FFT<S> fft;
  std::vector<S> frame(static_cast<std::size_t>(p.window_len));
  std::vector<std::complex<S>> spec;
  for (Index t = 0; t < frames; ++t) {
    const Index start = t * p.hop;
    for (Index i = 0; i < p.window_len; ++i) frame[static_cast<std::size_t>(i)] = w.samples[start + i] * p.window[i];
    fft.fwd(spec, frame);
    for (Index k = 0; k < bins; ++k) {
      const std::complex<S> c = spec[static_cast<std::size_t>(k)];
      s.mag(t, k) = std::abs(c);
      s.phase(t, k) = std::atan2(c.imag(), c.real());
    }
  }
  return s;
}

template <typename S>
Waveform<S> istft(const Spectrogram<S>& s, const FrameParams<S>& p, int sample_rate = kDefaultSampleRate) {
  SE_CHECK(!s.compressed, "decompress first: istft requires a linear-domain spectrogram");
  SE_CHECK(s.num_bins() == p.fft_bins, "spectrogram has ", s.num_bins(), " bins, frame params expect ",
           p.fft_bins);
  SE_CHECK(s.num_frames() >= 1, "spectrogram must hold at least one frame");

  const Index frames = s.num_frames();
  const Index n_fft = p.window_len;
  const Index out_len = (frames - 1) * p.hop + p.window_len;

  VectorX<S> acc = VectorX<S>::Zero(out_len);
  VectorX<S> wsq = VectorX<S>::Zero(out_len);

  Eigen::FFT<S> fft;
  std::vector<std::complex<S>> spec(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<S>> time;
  for (Index t = 0; t < frames; ++t) {
    for (Index k = 0; k < p.fft_bins; ++k) {
      const S m = s.mag(t, k);
      const S ph = s.phase(t, k);
      spec[static_cast<std::size_t>(k)] = {m * std::cos(ph), m * std::sin(ph)};
    }
    for (Index k = p.fft_bins; k < n_fft; ++k) {
      spec[static_cast<std::size_t>(k)] = std::conj(spec[static_cast<std::size_t>(n_fft - k)]);
    }
    fft.inv(time, spec);
    const Index start = t * p.hop;
    for (Index i = 0; i < p.window_len; ++i) {
      acc[start + i] += time[static_cast<std::size_t>(i)].real() * p.window[i];
      wsq[start + i] += p.window[i] * p.window[i];
    }
  }

  Waveform<S> out;
  out.sample_rate = sample_rate;
  out.samples = (wsq.array() > S(0)).select(acc.array() / wsq.array(), ArrayX<S>::Zero(out_len)).matrix();
  return out;
}

template <typename S>
Spectrogram<S> compress(const Spectrogram<S>& s) {
  SE_CHECK(!s.compressed, "already compressed");
  Spectrogram<S> out;
  out.mag = s.mag.array().log1p().matrix();
  out.phase = s.phase;
  out.compressed = true;
  return out;
}

template <typename S>
Spectrogram<S> decompress(const Spectrogram<S>& s) {
  SE_CHECK(s.compressed, "not compressed");
  Spectrogram<S> out;
  out.mag = s.mag.array().exp().matrix();
  out.mag.array() -= S(1);
  out.phase = s.phase;
  out.compressed = false;
  return out;
}

// Enhanced magnitude paired with the noisy phase, back to a waveform.
template <typename S>
Waveform<S> resynthesize(const Spectrogram<S>& enhanced_mag, const Spectrogram<S>& noisy,
                         const FrameParams<S>& p, int sample_rate = kDefaultSampleRate) {
  SE_CHECK(!enhanced_mag.compressed, "decompress first: resynthesis takes linear magnitudes");
  SE_CHECK(enhanced_mag.num_frames() == noisy.num_frames() &&
               enhanced_mag.num_bins() == noisy.num_bins(),
           "shape mismatch: enhanced ", enhanced_mag.num_frames(), "x", enhanced_mag.num_bins(),
           " vs noisy ", noisy.num_frames(), "x", noisy.num_bins());
  Spectrogram<S> paired;
  paired.mag = enhanced_mag.mag;
  paired.phase = noisy.phase;
  paired.compressed = false;
  return istft(paired, p, sample_rate);
}

// 10 log10(|ref|^2 / |est - ref|^2); +inf when est equals ref exactly.
template <typename S>
double snr_db(const VectorX<S>& est, const VectorX<S>& ref) {
  SE_CHECK(est.size() == ref.size(), "length mismatch: ", est.size(), " vs ", ref.size());
  const double ref_energy = ref.template cast<double>().squaredNorm();
  SE_CHECK(ref_energy > 0.0, "reference signal is all-zero");
  const double err_energy = (est - ref).template cast<double>().squaredNorm();
  if (err_energy == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref_energy / err_energy);
}

}  // namespace se
