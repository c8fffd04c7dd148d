#include "jetssm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>

#include "jetssm/ioutil.hpp"
#include "jetssm/rng.hpp"

namespace jetssm {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

void StairsSchedule::validate() const {
  if (standoffs_mm.empty()) throw ValidationError("schedule: no standoff steps");
  for (double z : standoffs_mm) {
    if (!(z > 0.0)) throw ValidationError("schedule: standoffs must be positive");
    depth_curve_lookup(z);  // throws if outside the curve's hull
  }
  if (!(dwell_s > 0.0) || !(transition_s >= 0.0) || lead_in_s < 0.0 || lead_out_s < 0.0)
    throw ValidationError("schedule: invalid timing");
  if (std::abs(dwell_s * traverse_speed_mm_s - segment_length_mm) > 1e-9)
    throw ValidationError("schedule: dwell * speed must equal segment length");
}

// ---------------------------------------------------------------------------
// Depth curve

const std::vector<DepthCurveRow>& depth_curve_anchors() {
  static const std::vector<DepthCurveRow> rows = {
      {2.0, 437.34, 185.99}, {3.0, 1257.45, 205.11}, {5.0, 1327.71, 405.06},
      {6.0, 1198.65, 259.41}, {7.0, 1004.1, 154.17},
  };
  return rows;
}

double depth_curve_mean_std() {
  const auto& rows = depth_curve_anchors();
  double acc = 0.0;
  for (const auto& r : rows) acc += r.std_um;
  return acc / static_cast<double>(rows.size());
}

std::pair<double, double> depth_curve_lookup(double standoff_mm) {
  const auto& rows = depth_curve_anchors();
  if (standoff_mm < rows.front().standoff_mm - 1e-12 ||
      standoff_mm > rows.back().standoff_mm + 1e-12)
    throw ValidationError("depth_curve_lookup: standoff " + std::to_string(standoff_mm) +
                          " mm outside [2, 7] mm");
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (standoff_mm <= rows[i + 1].standoff_mm + 1e-12) {
      const auto& lo = rows[i];
      const auto& hi = rows[i + 1];
      const double f = (standoff_mm - lo.standoff_mm) / (hi.standoff_mm - lo.standoff_mm);
      return {lo.mean_um + f * (hi.mean_um - lo.mean_um),
              lo.std_um + f * (hi.std_um - lo.std_um)};
    }
  }
  return {rows.back().mean_um, rows.back().std_um};
}

// ---------------------------------------------------------------------------
// Synthetic trial generator

namespace {

// l2-normalized moving average of white noise: unit marginal variance with a
// correlation length of `width` samples.
std::vector<double> correlated_noise(Rng& rng, std::size_t n, std::size_t width) {
  width = std::max<std::size_t>(width, 1);
  std::vector<double> white(n + width - 1);
  for (double& w : white) w = rng.normal();
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += white[i + j];
    out[i] = acc * scale;
  }
  return out;
}

// smoothstep-ish ramp in [0, 1]
double cos_ramp(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return 0.5 * (1.0 - std::cos(kPi * x));
}

// Fraction of full cutting engagement at time t: 0 on metal (lead-in,
// transitions, lead-out), ramping to 1 inside each dwell.
double cut_fraction(double t, const StairsSchedule& sched, double ramp_s, std::size_t* seg_out) {
  double cursor = sched.lead_in_s;
  if (t < cursor) return 0.0;
  for (std::size_t s = 0; s < sched.standoffs_mm.size(); ++s) {
    const double dwell_end = cursor + sched.dwell_s;
    if (t < dwell_end) {
      if (seg_out) *seg_out = s;
      const double into = t - cursor;
      const double left = dwell_end - t;
      double f = 1.0;
      if (ramp_s > 0.0) f = std::min(cos_ramp(into / ramp_s), cos_ramp(left / ramp_s));
      return f;
    }
    cursor = dwell_end + sched.transition_s;
    if (t < cursor) return 0.0;
  }
  return 0.0;
}

// Bank of equal-amplitude random sinusoids spread over [lo, hi] Hz;
// unit-variance band noise evaluated by complex rotation per sample.
class SineBank {
 public:
  SineBank(Rng& rng, std::size_t count, double lo_hz, double hi_hz, double sample_rate) {
    state_.resize(count);
    step_.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double f = rng.uniform(lo_hz, hi_hz);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const double w = 2.0 * kPi * f / sample_rate;
      state_[k] = std::polar(1.0, phase);
      step_[k] = std::polar(1.0, w);
    }
    amp_ = std::sqrt(2.0 / static_cast<double>(count));
  }

  double next() {
    double acc = 0.0;
    for (std::size_t k = 0; k < state_.size(); ++k) {
      acc += state_[k].imag();
      state_[k] *= step_[k];
    }
    return acc * amp_;
  }

 private:
  std::vector<std::complex<double>> state_, step_;
  double amp_ = 0.0;
};

}  // namespace

SynthTrial synthesize_trial(std::uint64_t seed, const StairsSchedule& schedule,
                            const GeneratorConfig& config) {
  schedule.validate();
  const std::size_t F = config.frames;
  const double total_s = schedule.total_duration_s();
  const double frame_dt = total_s / static_cast<double>(F);

  Rng depth_rng(derive_seed(seed, 0));
  Rng spatial_rng(derive_seed(seed, 1));
  Rng cement_rng(derive_seed(seed, 2));
  Rng metal_rng(derive_seed(seed, 3));
  Rng white_rng(derive_seed(seed, 4));

  SynthTrial trial;
  trial.depth_track_um.assign(F, 0.0);

  // --- per-frame peak depth --------------------------------------------
  // Each dwell draws a temporally correlated depth signal whose marginal
  // distribution matches the standoff's (mean, std) anchor.
  std::vector<double> frame_time(F);
  for (std::size_t t = 0; t < F; ++t)
    frame_time[t] = (static_cast<double>(t) + 0.5) * frame_dt;

  {
    double cursor = schedule.lead_in_s;
    for (double z : schedule.standoffs_mm) {
      const auto [mean_um, std_um] = depth_curve_lookup(z);
      const double t0 = cursor;
      const double t1 = cursor + schedule.dwell_s;
      std::size_t f0 = F, f1 = 0;
      for (std::size_t t = 0; t < F; ++t) {
        if (frame_time[t] >= t0 && frame_time[t] < t1) {
          f0 = std::min(f0, t);
          f1 = std::max(f1, t + 1);
        }
      }
      if (f0 < f1) {
        const std::vector<double> eta =
            correlated_noise(depth_rng, f1 - f0, config.depth_smoothing_frames);
        for (std::size_t t = f0; t < f1; ++t) {
          const double level = std::max(0.0, mean_um + std_um * eta[t - f0]);
          const double ramp =
              cut_fraction(frame_time[t], schedule, config.edge_ramp_s, nullptr);
          trial.depth_track_um[t] = level * ramp;
        }
      }
      cursor = t1 + schedule.transition_s;
    }
  }

  // --- cross-section profile -------------------------------------------
  trial.profiles.depths = SequenceTensor(F, kProfileColumns);
  const double center = (static_cast<double>(kProfileColumns) - 1.0) / 2.0;
  std::vector<double> bump(kProfileColumns);
  for (std::size_t j = 0; j < kProfileColumns; ++j) {
    const double d = (static_cast<double>(j) - center) / config.bump_width_cols;
    bump[j] = std::exp(-0.5 * d * d);
  }
  for (std::size_t t = 0; t < F; ++t) {
    const std::vector<double> noise =
        correlated_noise(spatial_rng, kProfileColumns, config.noise_correlation_cols);
    const bool cutting = trial.depth_track_um[t] > 0.0;
    const double noise_std = cutting ? config.profile_noise_um : config.metal_noise_um;
    for (std::size_t j = 0; j < kProfileColumns; ++j) {
      const double v = trial.depth_track_um[t] * bump[j] + noise_std * noise[j];
      trial.profiles.depths.at(t, j) = std::max(0.0, v);
    }
  }

  // --- audio -------------------------------------------------------------
  const double rate = config.sample_rate;
  const std::size_t n_samples = static_cast<std::size_t>(std::llround(total_s * rate));
  trial.audio.sample_rate = rate;
  trial.audio.samples.resize(n_samples);

  // A sonotrode above Nyquist shows up at its mirror frequency; emit that.
  double tone_hz = config.sonotrode_hz;
  if (tone_hz > rate / 2.0 && tone_hz < rate) tone_hz = rate - tone_hz;

  SineBank cement_bank(cement_rng, config.band_sines, config.cement_band_lo_hz,
                       config.cement_band_hi_hz, rate);
  SineBank metal_bank(metal_rng, config.band_sines, config.metal_band_lo_hz,
                      config.metal_band_hi_hz, rate);
  std::complex<double> tone = std::polar(1.0, cement_rng.uniform(0.0, 2.0 * kPi));
  const std::complex<double> tone_step = std::polar(1.0, 2.0 * kPi * tone_hz / rate);

  const double samples_per_frame = static_cast<double>(n_samples) / static_cast<double>(F);
  for (std::size_t s = 0; s < n_samples; ++s) {
    // depth at this sample: linear interpolation between frame centers
    const double pos = (static_cast<double>(s) + 0.5) / samples_per_frame - 0.5;
    double depth;
    if (pos <= 0.0) {
      depth = trial.depth_track_um.front();
    } else if (pos >= static_cast<double>(F - 1)) {
      depth = trial.depth_track_um.back();
    } else {
      const std::size_t lo = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(lo);
      depth = trial.depth_track_um[lo] +
              frac * (trial.depth_track_um[lo + 1] - trial.depth_track_um[lo]);
    }
    const double t_s = (static_cast<double>(s) + 0.5) / rate;
    const double cut = cut_fraction(t_s, schedule, config.edge_ramp_s, nullptr);

    const double cement_gain =
        config.cement_amplitude * std::min(depth / config.depth_ref_um, 1.2);
    const double metal_gain = config.metal_amplitude * (1.0 - cut);

    double v = config.tone_amplitude * tone.imag();
    tone *= tone_step;
    v += cement_gain * cement_bank.next();
    v += metal_gain * metal_bank.next();
    v += config.white_amplitude * white_rng.normal();
    trial.audio.samples[s] = v;
  }
  return trial;
}

std::vector<SegmentDepthStat> segment_depth_stats(const ErosionProfileSet& profiles,
                                                  const StairsSchedule& schedule) {
  const std::size_t F = profiles.frames();
  const double total_s = schedule.total_duration_s();
  const double frame_dt = total_s / static_cast<double>(F);

  std::vector<SegmentDepthStat> stats;
  double cursor = schedule.lead_in_s;
  for (double z : schedule.standoffs_mm) {
    // interior 80% of the dwell, clear of the onset/offset ramps
    const double margin = 0.1 * schedule.dwell_s;
    const double t0 = cursor + margin;
    const double t1 = cursor + schedule.dwell_s - margin;

    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < F; ++t) {
      const double ft = (static_cast<double>(t) + 0.5) * frame_dt;
      if (ft >= t0 && ft <= t1) rows.push_back(t);
    }

    SegmentDepthStat st{z, 0.0, 0.0};
    if (!rows.empty()) {
      // per-column time average, then the deepest column
      double best = 0.0;
      for (std::size_t j = 0; j < profiles.depths.channels; ++j) {
        double acc = 0.0;
        for (std::size_t t : rows) acc += profiles.depths.at(t, j);
        best = std::max(best, acc / static_cast<double>(rows.size()));
      }
      st.mean_um = best;
      // spread of the per-frame peak, for error bars
      double m = 0.0;
      std::vector<double> peaks(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double p = 0.0;
        for (std::size_t j = 0; j < profiles.depths.channels; ++j)
          p = std::max(p, profiles.depths.at(rows[i], j));
        peaks[i] = p;
        m += p;
      }
      m /= static_cast<double>(peaks.size());
      double var = 0.0;
      for (double p : peaks) var += (p - m) * (p - m);
      st.std_um = std::sqrt(var / static_cast<double>(peaks.size()));
    }
    stats.push_back(st);
    cursor += schedule.dwell_s + schedule.transition_s;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

bool parse_double(std::string_view sv, double& out) {
  // trim
  while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
  while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
    sv.remove_suffix(1);
  if (sv.empty()) return false;
  const char* end = sv.data() + sv.size();
  auto [ptr, ec] = std::from_chars(sv.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return cells;
}

SequenceTensor parse_csv_matrix(const std::string& text, const std::string& path,
                                std::size_t expect_channels, bool* had_header) {
  std::vector<std::string_view> lines;
  {
    std::string_view sv(text);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= sv.size(); ++i) {
      if (i == sv.size() || sv[i] == '\n') {
        std::string_view line = sv.substr(start, i - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        start = i + 1;
      }
    }
  }
  if (had_header) *had_header = false;
  std::size_t first_row = 0;
  if (!lines.empty()) {
    double v;
    const auto cells = split_csv_line(lines[0]);
    bool numeric = true;
    for (auto c : cells)
      if (!parse_double(c, v)) {
        numeric = false;
        break;
      }
    if (!numeric) {
      first_row = 1;
      if (had_header) *had_header = true;
    }
  }
  if (lines.size() <= first_row)
    throw ValidationError("CSV " + path + ": no rows");

  const std::size_t n_rows = lines.size() - first_row;
  const std::size_t n_cols = split_csv_line(lines[first_row]).size();
  if (expect_channels != 0 && n_cols != expect_channels)
    throw ValidationError("CSV " + path + ": expected " + std::to_string(expect_channels) +
                          " columns, got " + std::to_string(n_cols));

  SequenceTensor m(n_rows, n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto cells = split_csv_line(lines[first_row + r]);
    if (cells.size() != n_cols)
      throw ValidationError("CSV " + path + ": row " + std::to_string(first_row + r + 1) +
                            " has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(n_cols));
    for (std::size_t c = 0; c < n_cols; ++c) {
      double v;
      if (!parse_double(cells[c], v))
        throw ValidationError("CSV " + path + ": non-numeric cell at row " +
                              std::to_string(first_row + r + 1) + ", column " +
                              std::to_string(c + 1));
      m.at(r, c) = v;
    }
  }
  return m;
}

std::string format_csv_matrix(const SequenceTensor& m) {
  std::string out;
  out.reserve(m.data.size() * 20);
  char buf[32];
  for (std::size_t r = 0; r < m.frames; ++r) {
    for (std::size_t c = 0; c < m.channels; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(r, c));
      out += buf;
      out += (c + 1 == m.channels) ? '\n' : ',';
    }
  }
  return out;
}

}  // namespace

CsvLoadResult load_profiles_csv(const std::string& path) {
  const std::string text = read_file(path);
  CsvLoadResult res;
  res.profiles.depths = parse_csv_matrix(text, path, kProfileColumns, &res.had_header);
  for (double& v : res.profiles.depths.data) {
    if (v < 0.0) {
      v = 0.0;
      ++res.clamped_negatives;
    }
    if (!std::isfinite(v))
      throw ValidationError("CSV " + path + ": non-finite value");
  }
  return res;
}

void save_profiles_csv(const std::string& path, const ErosionProfileSet& profiles) {
  write_file_atomic(path, format_csv_matrix(profiles.depths));
}

SequenceTensor load_matrix_csv(const std::string& path, std::size_t expect_channels) {
  return parse_csv_matrix(read_file(path), path, expect_channels, nullptr);
}

void save_matrix_csv(const std::string& path, const SequenceTensor& m) {
  write_file_atomic(path, format_csv_matrix(m));
}

// ---------------------------------------------------------------------------
// Normalization / assembly / split

NormStats compute_norm_stats(const SequenceTensor& x) {
  NormStats st;
  st.source_frames = x.frames;
  st.mean.assign(x.channels, 0.0);
  st.stddev.assign(x.channels, 1.0);
  if (x.frames == 0) return st;
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t c = 0; c < x.channels; ++c) st.mean[c] += x.at(t, c);
  for (double& m : st.mean) m /= static_cast<double>(x.frames);
  std::vector<double> var(x.channels, 0.0);
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t c = 0; c < x.channels; ++c) {
      const double d = x.at(t, c) - st.mean[c];
      var[c] += d * d;
    }
  for (std::size_t c = 0; c < x.channels; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(x.frames));
    st.stddev[c] = sd > 1e-12 ? sd : 1.0;  // zero-variance channels: center only
  }
  return st;
}

SequenceTensor apply_norm(const SequenceTensor& x, const NormStats& stats) {
  if (stats.mean.size() != x.channels)
    throw ShapeError("apply_norm: stats cover " + std::to_string(stats.mean.size()) +
                     " channels, data has " + std::to_string(x.channels));
  SequenceTensor out(x.frames, x.channels);
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t c = 0; c < x.channels; ++c)
      out.at(t, c) = (x.at(t, c) - stats.mean[c]) / stats.stddev[c];
  return out;
}

SequenceTensor invert_norm(const SequenceTensor& x, const NormStats& stats) {
  if (stats.mean.size() != x.channels)
    throw ShapeError("invert_norm: channel mismatch");
  SequenceTensor out(x.frames, x.channels);
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t c = 0; c < x.channels; ++c)
      out.at(t, c) = x.at(t, c) * stats.stddev[c] + stats.mean[c];
  return out;
}

std::pair<SequenceTensor, NormStats> normalize_features(const SequenceTensor& x,
                                                        const NormStats* stats) {
  NormStats st = stats ? *stats : compute_norm_stats(x);
  return {apply_norm(x, st), st};
}

AlignedSample assemble_sample(const SequenceTensor& mel_features,
                              const SequenceTensor& profile_features,
                              const SequenceTensor& target_um, bool profile_mask) {
  if (mel_features.frames != profile_features.frames ||
      mel_features.frames != target_um.frames)
    throw ShapeError("assemble_sample: frame counts differ");
  require_channels(mel_features, kMelColumns, "assemble_sample mel block");
  require_channels(profile_features, kProfileColumns, "assemble_sample profile block");
  require_channels(target_um, kProfileColumns, "assemble_sample target");

  AlignedSample sample;
  sample.profile_mask = profile_mask;
  sample.input = SequenceTensor(mel_features.frames, kInputColumns);
  for (std::size_t t = 0; t < mel_features.frames; ++t) {
    for (std::size_t c = 0; c < kMelColumns; ++c) sample.input.at(t, c) = mel_features.at(t, c);
    for (std::size_t c = 0; c < kProfileColumns; ++c)
      sample.input.at(t, kMelColumns + c) = profile_mask ? profile_features.at(t, c) : 0.0;
  }
  sample.target_um = target_um;
  return sample;
}

std::pair<std::size_t, std::size_t> split_train_test(std::size_t frames) {
  if (frames < 2) throw ValidationError("split_train_test: need at least 2 frames");
  const std::size_t train = frames / 2;
  return {train, frames - train};
}

}  // namespace jetssm
