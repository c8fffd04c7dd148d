#include "jetssm/audio_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>

#include "jetssm/fft.hpp"
#include "jetssm/ioutil.hpp"

namespace jetssm {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// ---------------------------------------------------------------------------
// WAV

namespace {

struct FmtChunk {
  std::uint16_t format_tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

const char* format_tag_name(std::uint16_t tag) {
  switch (tag) {
    case 0x0002: return "ADPCM";
    case 0x0006: return "A-law";
    case 0x0007: return "mu-law";
    case 0x0011: return "IMA ADPCM";
    case 0x0055: return "MP3";
    default: return "unknown";
  }
}

}  // namespace

struct WavReader::Impl {
  std::FILE* file = nullptr;
  FmtChunk fmt;
  std::size_t data_bytes = 0;
  std::size_t bytes_left = 0;
  std::vector<unsigned char> buf;
};

WavReader::WavReader(const std::string& path) : impl_(new Impl) {
  impl_->file = std::fopen(path.c_str(), "rb");
  if (!impl_->file) {
    delete impl_;
    throw IoError("cannot open WAV file: " + path);
  }
  auto fail = [&](const std::string& msg) -> void {
    std::fclose(impl_->file);
    delete impl_;
    throw ValidationError("WAV " + path + ": " + msg);
  };

  unsigned char hdr[12];
  if (std::fread(hdr, 1, 12, impl_->file) != 12 || std::memcmp(hdr, "RIFF", 4) != 0 ||
      std::memcmp(hdr + 8, "WAVE", 4) != 0)
    fail("not a RIFF/WAVE file");

  bool have_fmt = false;
  for (;;) {
    unsigned char chdr[8];
    if (std::fread(chdr, 1, 8, impl_->file) != 8) fail("missing data chunk");
    const std::uint32_t size = read_u32(chdr + 4);
    if (std::memcmp(chdr, "fmt ", 4) == 0) {
      std::vector<unsigned char> body(size);
      if (std::fread(body.data(), 1, size, impl_->file) != size) fail("truncated fmt chunk");
      if (size < 16) fail("fmt chunk too small");
      impl_->fmt.format_tag = read_u16(body.data());
      impl_->fmt.channels = read_u16(body.data() + 2);
      impl_->fmt.sample_rate = read_u32(body.data() + 4);
      impl_->fmt.bits_per_sample = read_u16(body.data() + 14);
      if (impl_->fmt.format_tag == 0xFFFE && size >= 26) {
        // WAVE_FORMAT_EXTENSIBLE: subformat GUID starts at offset 24
        impl_->fmt.format_tag = read_u16(body.data() + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chdr, "data", 4) == 0) {
      if (!have_fmt) fail("data chunk before fmt chunk");
      impl_->data_bytes = size;
      impl_->bytes_left = size;
      break;
    } else {
      // skip unknown chunk (word aligned)
      if (std::fseek(impl_->file, static_cast<long>(size + (size & 1)), SEEK_CUR) != 0)
        fail("truncated chunk");
    }
  }

  const auto& f = impl_->fmt;
  const bool pcm_int = f.format_tag == 1 && (f.bits_per_sample == 16 ||
                                             f.bits_per_sample == 24 || f.bits_per_sample == 32);
  const bool pcm_float = f.format_tag == 3 && f.bits_per_sample == 32;
  if (!(pcm_int || pcm_float)) {
    const std::string msg = "unsupported WAV encoding: " +
                            std::string(format_tag_name(f.format_tag)) + " (format tag " +
                            std::to_string(f.format_tag) + ", " +
                            std::to_string(f.bits_per_sample) + "-bit)";
    std::fclose(impl_->file);
    delete impl_;
    throw ValidationError("WAV " + path + ": " + msg);
  }
  if (f.channels != 1 && f.channels != 2) fail("only mono or stereo supported");
  if (f.sample_rate == 0) fail("zero sample rate");

  sample_rate_ = static_cast<double>(f.sample_rate);
  const std::size_t frame_bytes = static_cast<std::size_t>(f.channels) * f.bits_per_sample / 8;
  total_frames_ = impl_->data_bytes / frame_bytes;
}

WavReader::~WavReader() {
  if (impl_) {
    if (impl_->file) std::fclose(impl_->file);
    delete impl_;
  }
}

std::size_t WavReader::read(std::size_t max_frames, std::vector<double>& out) {
  const auto& f = impl_->fmt;
  const std::size_t bytes_per_sample = f.bits_per_sample / 8;
  const std::size_t frame_bytes = f.channels * bytes_per_sample;
  const std::size_t want_frames =
      std::min(max_frames, impl_->bytes_left / frame_bytes);
  if (want_frames == 0) return 0;

  impl_->buf.resize(want_frames * frame_bytes);
  const std::size_t got = std::fread(impl_->buf.data(), 1, impl_->buf.size(), impl_->file);
  const std::size_t frames = got / frame_bytes;
  impl_->bytes_left -= frames * frame_bytes;

  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < f.channels; ++ch) {
      const unsigned char* p = impl_->buf.data() + (i * f.channels + ch) * bytes_per_sample;
      double v = 0.0;
      if (f.format_tag == 3) {  // float32
        float fv;
        std::memcpy(&fv, p, 4);
        v = static_cast<double>(fv);
      } else if (f.bits_per_sample == 16) {
        const std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        v = static_cast<double>(s) / 32768.0;
      } else if (f.bits_per_sample == 24) {
        std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s |= ~0xFFFFFF;  // sign extend
        v = static_cast<double>(s) / 8388608.0;
      } else {  // 32-bit int
        std::int32_t s;
        std::memcpy(&s, p, 4);
        v = static_cast<double>(s) / 2147483648.0;
      }
      acc += v;
    }
    out.push_back(acc / static_cast<double>(f.channels));
  }
  return frames;
}

AudioClip read_wav(const std::string& path) {
  WavReader reader(path);
  AudioClip clip;
  clip.sample_rate = reader.sample_rate();
  clip.samples.reserve(reader.total_frames());
  while (reader.read(1 << 16, clip.samples) > 0) {
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  std::string bytes;
  bytes.reserve(44 + 2 * n);
  auto put_u32 = [&](std::uint32_t v) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>((v >> 8) & 0xFF));
    bytes.push_back(static_cast<char>((v >> 16) & 0xFF));
    bytes.push_back(static_cast<char>((v >> 24) & 0xFF));
  };
  auto put_u16 = [&](std::uint16_t v) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>((v >> 8) & 0xFF));
  };
  bytes.append("RIFF");
  put_u32(36 + 2 * n);
  bytes.append("WAVE");
  bytes.append("fmt ");
  put_u32(16);
  put_u16(1);         // PCM
  put_u16(1);         // mono
  put_u32(rate);
  put_u32(rate * 2);  // byte rate
  put_u16(2);         // block align
  put_u16(16);        // bits
  bytes.append("data");
  put_u32(2 * n);
  for (double s : clip.samples) {
    double scaled = std::round(s * 32768.0);
    scaled = std::clamp(scaled, -32768.0, 32767.0);
    put_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  write_file_atomic(path, bytes);
}

// ---------------------------------------------------------------------------
// Mel features

std::vector<double> mel_center_frequencies(double sample_rate, std::size_t n_mels, double fmin,
                                           double fmax) {
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  if (!(fmin < fmax) || fmax > sample_rate / 2.0 + 1e-9)
    throw ValidationError("mel filterbank: need fmin < fmax <= rate/2");
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  const double step = (mel_hi - mel_lo) / static_cast<double>(n_mels + 1);
  std::vector<double> centers(n_mels);
  for (std::size_t i = 0; i < n_mels; ++i)
    centers[i] = mel_to_hz(mel_lo + step * static_cast<double>(i + 1));
  return centers;
}

SequenceTensor mel_filterbank(std::size_t n_fft, double sample_rate, std::size_t n_mels,
                              double fmin, double fmax) {
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  if (!(fmin < fmax) || fmax > sample_rate / 2.0 + 1e-9)
    throw ValidationError("mel filterbank: need fmin < fmax <= rate/2");
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  const double step = (mel_hi - mel_lo) / static_cast<double>(n_mels + 1);

  // mel-domain edge points: filter i spans points i-1 .. i+1 with unit peak
  std::vector<double> mel_points(n_mels + 2);
  for (std::size_t i = 0; i < mel_points.size(); ++i)
    mel_points[i] = mel_lo + step * static_cast<double>(i);

  SequenceTensor fb(n_mels, n_bins, 0.0);
  for (std::size_t bin = 0; bin < n_bins; ++bin) {
    const double f = static_cast<double>(bin) * sample_rate / static_cast<double>(n_fft);
    const double m = hz_to_mel(f);
    for (std::size_t i = 0; i < n_mels; ++i) {
      const double left = mel_points[i];
      const double center = mel_points[i + 1];
      const double right = mel_points[i + 2];
      double w = 0.0;
      if (m > left && m < right)
        w = m <= center ? (m - left) / (center - left) : (right - m) / (right - center);
      fb.at(i, bin) = w;
    }
  }
  return fb;
}

std::size_t choose_hop(std::size_t n_samples, std::size_t target_frames, std::size_t n_fft) {
  if (n_samples < n_fft) throw ValidationError("choose_hop: clip shorter than one window");
  std::size_t hop = n_samples / (target_frames + 1);
  hop = std::max<std::size_t>(hop, 64);
  // shrink if the clip is too short for target_frames at this hop
  while (hop > 1 && 1 + (n_samples - n_fft) / hop < target_frames) --hop;
  return hop;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, std::size_t n_fft, std::size_t hop,
                               std::size_t n_mels) {
  if (clip.samples.size() < n_fft)
    throw ValidationError("mel_spectrogram: clip shorter than one window");
  if (hop == 0) hop = std::max<std::size_t>(clip.samples.size() / 1151, 64);

  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t n_frames = 1 + (clip.samples.size() - n_fft) / hop;
  const SequenceTensor fb = mel_filterbank(n_fft, clip.sample_rate, n_mels, 0.0, 0.0);

  // periodic Hann
  std::vector<double> window(n_fft);
  const double pi = 3.141592653589793238462643383279502884;
  for (std::size_t i = 0; i < n_fft; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) /
                                      static_cast<double>(n_fft)));

  MelSpectrogram out;
  out.frames = SequenceTensor(n_frames, n_mels);
  out.hop_seconds = static_cast<double>(hop) / clip.sample_rate;
  out.n_mels = n_mels;
  out.fmin = 0.0;
  out.fmax = clip.sample_rate / 2.0;

  std::vector<std::complex<double>> spectrum(n_fft);
  std::vector<double> mag(n_bins);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* src = clip.samples.data() + t * hop;
    for (std::size_t i = 0; i < n_fft; ++i) spectrum[i] = src[i] * window[i];
    fft::transform(spectrum, false);
    for (std::size_t b = 0; b < n_bins; ++b) mag[b] = std::abs(spectrum[b]);
    for (std::size_t m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      const double* w = fb.row(m);
      for (std::size_t b = 0; b < n_bins; ++b) acc += w[b] * mag[b];
      out.frames.at(t, m) = std::log(acc + kLogFloorEps);
    }
  }
  return out;
}

SequenceTensor align_to_timeline(const MelSpectrogram& spec, std::size_t target_frames) {
  const std::size_t src_frames = spec.frames.frames;
  if (src_frames < 2) throw ValidationError("align_to_timeline: need at least 2 source frames");
  if (target_frames < 2) throw ValidationError("align_to_timeline: need at least 2 target frames");
  const std::size_t ch = spec.frames.channels;

  SequenceTensor out(target_frames, ch);
  const double scale =
      static_cast<double>(src_frames - 1) / static_cast<double>(target_frames - 1);
  for (std::size_t t = 0; t < target_frames; ++t) {
    const double pos = static_cast<double>(t) * scale;
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo >= src_frames - 1) lo = src_frames - 2;
    const double frac = pos - static_cast<double>(lo);
    const double* a = spec.frames.row(lo);
    const double* b = spec.frames.row(lo + 1);
    for (std::size_t c = 0; c < ch; ++c) out.at(t, c) = a[c] + frac * (b[c] - a[c]);
  }
  return out;
}

}  // namespace jetssm
