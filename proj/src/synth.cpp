#include "sernas/audio/synth.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace sernas::audio {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Band-limited noise of length n: unit-magnitude random-phase spectrum inside
// [f_lo, f_hi], inverse real FFT.
std::vector<double> band_noise(int n, int sample_rate, double f_lo, double f_hi,
                               RngStream& rng) {
  const int bins = n / 2 + 1;
  std::vector<fftw_complex> spec(bins);
  for (int b = 0; b < bins; ++b) spec[b][0] = spec[b][1] = 0.0;
  const int b_lo = std::max(1, static_cast<int>(f_lo * n / sample_rate));
  const int b_hi = std::min(bins - 1, static_cast<int>(f_hi * n / sample_rate));
  for (int b = b_lo; b <= b_hi; ++b) {
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    spec[b][0] = std::cos(phase);
    spec[b][1] = std::sin(phase);
  }
  std::vector<double> out(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_c2r_1d(n, spec.data(), out.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace

std::vector<Utterance> synth_dataset(const SynthConfig& cfg, RngStream rng) {
  if (cfg.classes != 4)
    throw std::invalid_argument("synth_dataset: 4 emotion classes expected");
  if (cfg.n_utterances < cfg.classes)
    throw std::invalid_argument("synth_dataset: need at least one utterance per class");
  if (cfg.speakers != 2 * cfg.sessions)
    throw std::invalid_argument("synth_dataset: two speakers per session expected");

  std::vector<Utterance> utts;
  utts.reserve(cfg.n_utterances);
  for (int i = 0; i < cfg.n_utterances; ++i) {
    auto r = rng.split("utt" + std::to_string(i));
    Utterance u;
    u.label = i % cfg.classes;
    // block rotation rather than i % speakers: keeps every speaker's class
    // distribution uniform (periods 4 and 10 would alias otherwise)
    u.speaker = (i / cfg.classes) % cfg.speakers;
    u.session = u.speaker / 2;
    u.sample_rate = cfg.sample_rate;
    u.id = "synth" + std::to_string(i);

    const double dur = r.uniform(cfg.min_seconds, cfg.max_seconds);
    const int n = static_cast<int>(dur * cfg.sample_rate);

    // per-speaker shift of the class band
    const double spread =
        1.0 + cfg.speaker_band_spread *
                  (2.0 * u.speaker / (cfg.speakers - 1) - 1.0);
    const auto [lo, hi] = cfg.bands[u.label];
    auto sig = band_noise(n, cfg.sample_rate, lo * spread, hi * spread, r);

    double rms = 0;
    for (double v : sig) rms += v * v;
    rms = std::sqrt(rms / n);
    if (rms <= 0) rms = 1.0;

    const double am = cfg.am_rates[u.label];
    const double phase0 = r.uniform(0.0, 2.0 * M_PI);
    u.samples.resize(n);
    double peak = 0;
    for (int t = 0; t < n; ++t) {
      const double mod =
          1.0 - cfg.am_depth *
                    (0.5 + 0.5 * std::sin(2.0 * M_PI * am * t / cfg.sample_rate +
                                          phase0));
      const double v =
          sig[t] / rms * mod + cfg.noise_level * r.normal();
      u.samples[t] = static_cast<float>(v);
      peak = std::max(peak, std::abs(v));
    }
    const float scale = static_cast<float>(0.7 / std::max(peak, 1e-9));
    for (auto& v : u.samples) v *= scale;
    utts.push_back(std::move(u));
  }
  return utts;
}

}  // namespace sernas::audio
