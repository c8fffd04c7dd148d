#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "jetssm/errors.hpp"
#include "jetssm/tensor.hpp"

namespace jetssm {

struct AudioClip {
  std::vector<double> samples;  // normalized to [-1, 1]
  double sample_rate = 38400.0;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct MelSpectrogram {
  SequenceTensor frames;  // [T x n_mels], log-amplitude
  double hop_seconds = 0.0;
  std::size_t n_mels = 60;
  double fmin = 0.0;
  double fmax = 0.0;
};

inline constexpr double kLogFloorEps = 1e-10;

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Incremental RIFF/WAVE reader. PCM 16/24/32-bit integer and 32-bit float,
/// mono or stereo (stereo is downmixed by averaging). Other encodings raise
/// an error naming the format tag.
class WavReader {
 public:
  explicit WavReader(const std::string& path);
  ~WavReader();
  WavReader(const WavReader&) = delete;
  WavReader& operator=(const WavReader&) = delete;

  double sample_rate() const { return sample_rate_; }
  std::size_t total_frames() const { return total_frames_; }  // per-channel sample count

  // Appends up to max_frames downmixed samples to out; returns count read.
  std::size_t read(std::size_t max_frames, std::vector<double>& out);

 private:
  struct Impl;
  Impl* impl_;
  double sample_rate_ = 0.0;
  std::size_t total_frames_ = 0;
};

AudioClip read_wav(const std::string& path);

/// 16-bit PCM mono writer (atomic: temp file + rename).
void write_wav(const std::string& path, const AudioClip& clip);

/// Triangular mel filterbank, [n_mels x (n_fft/2+1)], unit peak per filter.
SequenceTensor mel_filterbank(std::size_t n_fft, double sample_rate, std::size_t n_mels = 60,
                              double fmin = 0.0, double fmax = 0.0 /* 0 -> rate/2 */);

/// Center frequency (Hz) of each filter; same construction as mel_filterbank.
std::vector<double> mel_center_frequencies(double sample_rate, std::size_t n_mels, double fmin,
                                           double fmax);

/// Magnitude STFT (Hann window) -> filterbank -> log(x + eps).
/// Frame count is 1 + floor((len - n_fft)/hop).
MelSpectrogram mel_spectrogram(const AudioClip& clip, std::size_t n_fft = 1024,
                               std::size_t hop = 0 /* 0 -> choose from length */,
                               std::size_t n_mels = 60);

/// Hop that guarantees at least target_frames+1 STFT frames for this length.
std::size_t choose_hop(std::size_t n_samples, std::size_t target_frames,
                       std::size_t n_fft = 1024);

/// Per-channel linear interpolation onto a uniform grid spanning the clip;
/// endpoints preserved.
SequenceTensor align_to_timeline(const MelSpectrogram& spec, std::size_t target_frames);

}  // namespace jetssm
