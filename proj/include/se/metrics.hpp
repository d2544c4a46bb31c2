#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>

#include "se/dsp.hpp"
#include "se/wav_io.hpp"

namespace se {

// Black-box normalized quality function: raw score then a monotone map into
// [0, 1]. Identical signals always normalize to 1.
template <typename S>
struct MetricFn {
  std::string name;
  std::function<double(const Waveform<S>&, const Waveform<S>&)> raw;
  std::function<double(double)> normalize;

  double operator()(const Waveform<S>& enhanced, const Waveform<S>& clean) const {
    return normalize(raw(enhanced, clean));
  }
};

// SNR in dB mapped through a clamped affine window: -10 dB -> 0, 30 dB -> 1.
// The window is an implementation constant chosen to keep the target
// informative across a whole training run.
inline double normalize_snr(double snr) {
  const double q = (snr + 10.0) / 40.0;
  return q < 0.0 ? 0.0 : (q > 1.0 ? 1.0 : q);
}

template <typename S>
double q_snr(const Waveform<S>& enhanced, const Waveform<S>& clean) {
  return normalize_snr(snr_db(enhanced.samples, clean.samples));
}

template <typename S>
MetricFn<S> make_qsnr_metric() {
  return MetricFn<S>{
      "qsnr",
      [](const Waveform<S>& e, const Waveform<S>& c) { return snr_db(e.samples, c.samples); },
      normalize_snr};
}

// Affine map of a [-0.5, 4.5] raw perceptual score into [0, 1]. Out-of-range
// raws are clamped with a warning.
inline double normalize_pesq(double raw) {
  if (raw < -0.5 || raw > 4.5) {
    log_warn("raw metric score ", raw, " outside [-0.5, 4.5], clamping");
    raw = raw < -0.5 ? -0.5 : 4.5;
  }
  return (raw + 0.5) / 5.0;
}

namespace detail {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  SE_CHECK(pipe != nullptr, "failed to launch: ", cmd);
  std::array<char, 512> buf;
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) {
    r.output += buf.data();
  }
  const int status = ::pclose(pipe);
  r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string substitute_paths(std::string tmpl, const std::string& enhanced,
                                    const std::string& clean) {
  const auto replace_all = [&tmpl](const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = tmpl.find(key, pos)) != std::string::npos) {
      tmpl.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace_all("{enhanced}", enhanced);
  replace_all("{clean}", clean);
  return tmpl;
}

}  // namespace detail

// Wraps an external scorer: the command template's {enhanced} and {clean}
// placeholders receive WAV paths, the command prints one raw number, and the
// raw score is normalized as a [-0.5, 4.5] perceptual score.
template <typename S>
MetricFn<S> make_external_metric(const std::string& command_template) {
  SE_CHECK(command_template.find("{enhanced}") != std::string::npos &&
               command_template.find("{clean}") != std::string::npos,
           "external metric command must contain {enhanced} and {clean} placeholders: ",
           command_template);
  auto raw_fn = [command_template](const Waveform<S>& e, const Waveform<S>& c) -> double {
    static std::atomic<uint64_t> counter{0};
    const auto dir = std::filesystem::temp_directory_path();
    const uint64_t id = counter.fetch_add(1);
    const std::string e_path =
        (dir / str_cat("se_metric_", ::getpid(), "_", id, "_enh.wav")).string();
    const std::string c_path =
        (dir / str_cat("se_metric_", ::getpid(), "_", id, "_cln.wav")).string();
    write_wav(e_path, e);
    write_wav(c_path, c);
    const std::string cmd = detail::substitute_paths(command_template, e_path, c_path);
    const detail::CommandResult result = detail::run_command(cmd);
    std::error_code ignored;
    std::filesystem::remove(e_path, ignored);
    std::filesystem::remove(c_path, ignored);
    SE_CHECK(result.exit_code == 0, "external metric failed (exit ", result.exit_code, "): ", cmd,
             "\noutput: ", result.output);
    double value = 0.0;
    try {
      std::size_t consumed = 0;
      value = std::stod(result.output, &consumed);
      (void)consumed;
    } catch (const std::exception&) {
      fail("external metric printed no parseable number: ", cmd, "\noutput: ", result.output);
    }
    return value;
  };
  return MetricFn<S>{str_cat("external:", command_template), std::move(raw_fn), normalize_pesq};
}

// "qsnr" or "external:<command template>".
template <typename S>
MetricFn<S> make_metric(const std::string& spec) {
  if (spec == "qsnr") return make_qsnr_metric<S>();
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0) return make_external_metric<S>(spec.substr(prefix.size()));
  fail("unknown metric '", spec, "' (expected qsnr or external:<command>)");
}

}  // namespace se
