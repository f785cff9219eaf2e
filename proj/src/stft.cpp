#include "sernas/audio/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace sernas::audio {

namespace {

// FFTW plan creation is not thread-safe; execution on per-call buffers is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Spectrogram stft_spectrogram(const Utterance& u, const StftConfig& cfg) {
  u.validate();
  const int win = static_cast<int>(std::lround(cfg.window_ms * u.sample_rate / 1000.0));
  const int shift = static_cast<int>(std::lround(cfg.shift_ms * u.sample_rate / 1000.0));
  if (win < 1 || shift < 1)
    throw std::invalid_argument("stft: window/shift too small for sample rate");
  if (cfg.dft_len < win)
    throw std::invalid_argument("stft: dft_len " + std::to_string(cfg.dft_len) +
                                " shorter than window of " + std::to_string(win) +
                                " samples");
  const int n = static_cast<int>(u.samples.size());
  if (n < win)
    throw std::invalid_argument("stft: waveform of " + std::to_string(n) +
                                " samples shorter than one window (" +
                                std::to_string(win) + ")");
  const int frames = (n - win) / shift + 1;
  const int bins = cfg.dft_len / 2 + 1;

  // periodic Hanning window
  std::vector<double> window(win);
  for (int i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  std::vector<double> in(cfg.dft_len, 0.0);
  std::vector<fftw_complex> out(bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_r2c_1d(cfg.dft_len, in.data(), out.data(),
                                FFTW_ESTIMATE);
  }
  if (!plan) throw std::runtime_error("stft: fftw plan creation failed");

  Spectrogram spec;
  spec.frames = frames;
  spec.bins = bins;
  spec.frame_shift_s = shift / static_cast<double>(u.sample_rate);
  spec.mag.resize(static_cast<size_t>(frames) * bins);
  for (int t = 0; t < frames; ++t) {
    const float* src = u.samples.data() + static_cast<size_t>(t) * shift;
    for (int i = 0; i < win; ++i) in[i] = window[i] * src[i];
    std::fill(in.begin() + win, in.end(), 0.0);
    fftw_execute_dft_r2c(plan, in.data(), out.data());
    for (int b = 0; b < bins; ++b) {
      const double m = std::hypot(out[b][0], out[b][1]);
      spec.at(t, b) = static_cast<float>(std::log1p(m));
    }
  }
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  return spec;
}

NormStats compute_norm_stats(const std::vector<const Spectrogram*>& specs) {
  if (specs.empty())
    throw std::invalid_argument("compute_norm_stats: no spectrograms");
  const int bins = specs[0]->bins;
  NormStats s;
  s.mean.assign(bins, 0.0);
  s.stdev.assign(bins, 0.0);
  int64_t total = 0;
  for (const auto* sp : specs) {
    if (sp->bins != bins)
      throw std::invalid_argument("compute_norm_stats: bin-count mismatch");
    for (int t = 0; t < sp->frames; ++t)
      for (int b = 0; b < bins; ++b) s.mean[b] += sp->at(t, b);
    total += sp->frames;
  }
  for (int b = 0; b < bins; ++b) s.mean[b] /= static_cast<double>(total);
  for (const auto* sp : specs)
    for (int t = 0; t < sp->frames; ++t)
      for (int b = 0; b < bins; ++b) {
        const double d = sp->at(t, b) - s.mean[b];
        s.stdev[b] += d * d;
      }
  for (int b = 0; b < bins; ++b)
    s.stdev[b] = std::sqrt(s.stdev[b] / static_cast<double>(total));
  return s;
}

void normalize(Spectrogram& spec, const NormStats& stats) {
  if (static_cast<int>(stats.mean.size()) != spec.bins)
    throw std::invalid_argument("normalize: stats cover " +
                                std::to_string(stats.mean.size()) +
                                " bins, spectrogram has " +
                                std::to_string(spec.bins));
  for (int t = 0; t < spec.frames; ++t)
    for (int b = 0; b < spec.bins; ++b) {
      const double sd = std::max(stats.stdev[b], 1e-8);
      spec.at(t, b) = static_cast<float>((spec.at(t, b) - stats.mean[b]) / sd);
    }
  spec.normalized = true;
}

std::vector<Spectrogram> segment(const Spectrogram& spec, double seconds) {
  if (spec.frame_shift_s <= 0)
    throw std::invalid_argument("segment: unknown frame shift");
  const int seg = static_cast<int>(std::lround(seconds / spec.frame_shift_s));
  if (seg < 1) throw std::invalid_argument("segment: segment shorter than a frame");
  std::vector<Spectrogram> out;
  const int full = spec.frames / seg;
  auto make = [&](int t0, int len) {
    Spectrogram s;
    s.frames = seg;
    s.bins = spec.bins;
    s.frame_shift_s = spec.frame_shift_s;
    s.normalized = spec.normalized;
    s.mag.assign(static_cast<size_t>(seg) * spec.bins, 0.0f);
    std::memcpy(s.mag.data(), spec.mag.data() + static_cast<size_t>(t0) * spec.bins,
                static_cast<size_t>(len) * spec.bins * sizeof(float));
    out.push_back(std::move(s));
  };
  for (int i = 0; i < full; ++i) make(i * seg, seg);
  const int rem = spec.frames - full * seg;
  if ((full == 0 && rem > 0) || rem * 2 >= seg) make(full * seg, rem);
  return out;
}

void save_spectrogram(const Spectrogram& spec, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f.write("SNSPEC1\n", 8);
    const uint32_t fr = static_cast<uint32_t>(spec.frames);
    const uint32_t bn = static_cast<uint32_t>(spec.bins);
    f.write(reinterpret_cast<const char*>(&fr), 4);
    f.write(reinterpret_cast<const char*>(&bn), 4);
    f.write(reinterpret_cast<const char*>(&spec.frame_shift_s), 8);
    const uint8_t norm = spec.normalized ? 1 : 0;
    f.write(reinterpret_cast<const char*>(&norm), 1);
    f.write(reinterpret_cast<const char*>(spec.mag.data()),
            static_cast<std::streamsize>(spec.mag.size() * sizeof(float)));
  }
  std::filesystem::rename(tmp, path);
}

Spectrogram load_spectrogram(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, "SNSPEC1\n", 8) != 0)
    throw std::runtime_error(path + ": not a spectrogram cache file");
  uint32_t fr = 0, bn = 0;
  double shift = 0;
  uint8_t norm = 0;
  f.read(reinterpret_cast<char*>(&fr), 4);
  f.read(reinterpret_cast<char*>(&bn), 4);
  f.read(reinterpret_cast<char*>(&shift), 8);
  f.read(reinterpret_cast<char*>(&norm), 1);
  Spectrogram s;
  s.frames = static_cast<int>(fr);
  s.bins = static_cast<int>(bn);
  s.frame_shift_s = shift;
  s.normalized = norm != 0;
  s.mag.resize(static_cast<size_t>(fr) * bn);
  f.read(reinterpret_cast<char*>(s.mag.data()),
         static_cast<std::streamsize>(s.mag.size() * sizeof(float)));
  if (!f) throw std::runtime_error(path + ": truncated cache file");
  return s;
}

uint64_t stats_fingerprint(const NormStats& stats) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::vector<double>& v) {
    for (double d : v) {
      uint64_t bits;
      std::memcpy(&bits, &d, 8);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    }
  };
  mix(stats.mean);
  mix(stats.stdev);
  return h;
}

}  // namespace sernas::audio
