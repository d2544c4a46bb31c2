#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "se/dsp.hpp"

namespace se {

// Only PCM 16-bit signed little-endian mono at 16 kHz is accepted; anything
// else is rejected with a descriptive error.

namespace wav_detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(static_cast<std::uint32_t>(p[0]) |
                                    (static_cast<std::uint32_t>(p[1]) << 8));
}

inline void write_u32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u16(std::ofstream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace wav_detail

template <typename S>
Waveform<S> read_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream is(path, std::ios::binary);
  SE_CHECK(is.good(), "cannot open WAV file: ", path);

  std::array<unsigned char, 12> riff{};
  is.read(reinterpret_cast<char*>(riff.data()), 12);
  SE_CHECK(is.gcount() == 12 && std::memcmp(riff.data(), "RIFF", 4) == 0 &&
               std::memcmp(riff.data() + 8, "WAVE", 4) == 0,
           path, ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<std::int16_t> pcm;
  bool have_data = false;

  std::array<unsigned char, 8> hdr{};
  while (is.read(reinterpret_cast<char*>(hdr.data()), 8)) {
    const std::uint32_t chunk_size = read_u32(hdr.data() + 4);
    if (std::memcmp(hdr.data(), "fmt ", 4) == 0) {
      SE_CHECK(chunk_size >= 16, path, ": malformed fmt chunk");
      std::vector<unsigned char> fmt(chunk_size);
      is.read(reinterpret_cast<char*>(fmt.data()), chunk_size);
      SE_CHECK(is.gcount() == static_cast<std::streamsize>(chunk_size), path, ": truncated fmt chunk");
      audio_format = read_u16(fmt.data() + 0);
      channels = read_u16(fmt.data() + 2);
      rate = read_u32(fmt.data() + 4);
      bits = read_u16(fmt.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr.data(), "data", 4) == 0) {
      SE_CHECK(have_fmt, path, ": data chunk before fmt chunk");
      pcm.resize(chunk_size / 2);
      is.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 2));
      SE_CHECK(is.gcount() == static_cast<std::streamsize>(pcm.size() * 2), path,
               ": truncated data chunk");
      have_data = true;
      if (chunk_size % 2 == 1) is.seekg(1, std::ios::cur);
    } else {
      // Skip unknown chunks (LIST, fact, ...), honoring the pad byte.
      is.seekg(chunk_size + (chunk_size % 2), std::ios::cur);
    }
  }
  SE_CHECK(have_fmt && have_data, path, ": missing fmt or data chunk");
  SE_CHECK(audio_format == 1, path, ": unsupported audio format tag ", audio_format,
           " (expected 1 = PCM)");
  SE_CHECK(channels == 1, path, ": unsupported channel count ", channels, " (expected mono)");
  SE_CHECK(bits == 16, path, ": unsupported bit depth ", bits, " (expected 16)");
  SE_CHECK(rate == kDefaultSampleRate, path, ": unsupported sample rate ", rate, " (expected ",
           kDefaultSampleRate, ")");

  Waveform<S> w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(static_cast<Index>(pcm.size()));
  // Scaling by 1/32768 keeps every loaded sample inside [-1, 1].
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    w.samples[static_cast<Index>(i)] = static_cast<S>(pcm[i]) / static_cast<S>(32768);
  }
  return w;
}

template <typename S>
void write_wav(const std::string& path, const Waveform<S>& w) {
  using namespace wav_detail;
  SE_CHECK(w.sample_rate == kDefaultSampleRate, "write_wav expects ", kDefaultSampleRate,
           " Hz, got ", w.sample_rate);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  SE_CHECK(os.good(), "cannot open for writing: ", path);

  const std::uint32_t n = static_cast<std::uint32_t>(w.length());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, 1);                                    // PCM
  write_u16(os, 1);                                    // mono
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate) * 2);  // byte rate
  write_u16(os, 2);                                    // block align
  write_u16(os, 16);                                   // bits
  os.write("data", 4);
  write_u32(os, data_bytes);
  for (Index i = 0; i < w.length(); ++i) {
    // same 32768 scale as the reader, so a loaded file re-saves bit-exactly
    long qi = std::lrint(static_cast<double>(w.samples[i]) * 32768.0);
    if (qi > 32767) qi = 32767;
    if (qi < -32768) qi = -32768;
    const auto q = static_cast<std::int16_t>(qi);
    const unsigned char b[2] = {static_cast<unsigned char>(q & 0xff),
                                static_cast<unsigned char>((q >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
  SE_CHECK(os.good(), "write failed: ", path);
}

}  // namespace se
