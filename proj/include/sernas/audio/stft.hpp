#pragma once

#include <string>
#include <vector>

#include "sernas/audio/types.hpp"

namespace sernas::audio {

struct StftConfig {
  double window_ms = 40.0;
  double shift_ms = 10.0;
  int dft_len = 1600;  // >= window samples; bins = dft_len/2 + 1
};

// Hanning-windowed magnitude spectrogram with log(1+|X|) compression.
// Frame count is exactly floor((samples - window)/shift) + 1.
Spectrogram stft_spectrogram(const Utterance& u, const StftConfig& cfg);

// Per-bin standardization stats over a set of spectrograms (training data).
NormStats compute_norm_stats(const std::vector<const Spectrogram*>& specs);

// Standardizes in place with the given stats; std is floored at 1e-8.
void normalize(Spectrogram& spec, const NormStats& stats);

// Non-overlapping fixed-length segments of `seconds`, inheriting the label.
// A trailing remainder covering at least half a segment is zero-padded to
// full length; shorter remainders are dropped. A spectrogram shorter than one
// segment yields a single zero-padded segment.
std::vector<Spectrogram> segment(const Spectrogram& spec, double seconds);

// Flat binary cache: magic "SNSPEC1\n", u32 frames, u32 bins,
// f64 frame_shift_s, u8 normalized, then frames*bins little-endian f32
// row-major. Writes go to a temp file renamed into place.
void save_spectrogram(const Spectrogram& spec, const std::string& path);
Spectrogram load_spectrogram(const std::string& path);

uint64_t stats_fingerprint(const NormStats& stats);

}  // namespace sernas::audio
