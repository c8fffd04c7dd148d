#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "jetssm/audio_frontend.hpp"
#include "jetssm/tensor.hpp"

namespace jetssm {

// Erosion depths in micrometers, [frames x 70], nonnegative.
struct ErosionProfileSet {
  SequenceTensor depths;
  std::size_t frames() const { return depths.frames; }
};

inline constexpr std::size_t kProfileColumns = 70;
inline constexpr std::size_t kMelColumns = 60;
inline constexpr std::size_t kInputColumns = kMelColumns + kProfileColumns;
inline constexpr std::size_t kCanonicalFrames = 1150;

/// Standoff-distance step plan driving the synthetic trials: each step dwells
/// for dwell_s while the head traverses one segment, then takes transition_s
/// to reach the next standoff.
struct StairsSchedule {
  std::vector<double> standoffs_mm{2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  double dwell_s = 2.0;
  double transition_s = 1.0;
  double traverse_speed_mm_s = 5.0;
  double segment_length_mm = 10.0;
  double lead_in_s = 1.0;
  double lead_out_s = 1.0;

  double total_duration_s() const {
    return lead_in_s +
           static_cast<double>(standoffs_mm.size()) * (dwell_s + transition_s) + lead_out_s;
  }
  void validate() const;
};

/// Disintegration depth vs. standoff distance: measured anchor rows with
/// piecewise-linear interpolation in between. The mean peaks at z = 5 mm.
struct DepthCurveRow {
  double standoff_mm;
  double mean_um;
  double std_um;
};

const std::vector<DepthCurveRow>& depth_curve_anchors();

/// Mean of the anchor stds: the generator's depth-noise scale in um.
double depth_curve_mean_std();

std::pair<double, double> depth_curve_lookup(double standoff_mm);

struct GeneratorConfig {
  double sample_rate = 38400.0;
  std::size_t frames = kCanonicalFrames;
  double sonotrode_hz = 22170.0;  // above Nyquist at 38.4 kHz; emitted as its alias

  // profile texture
  double profile_noise_um = 8.0;       // spatially correlated cross-section noise
  std::size_t noise_correlation_cols = 8;
  double metal_noise_um = 2.0;         // residual depth during metal contact
  std::size_t depth_smoothing_frames = 9;  // temporal correlation of the depth draw
  double bump_width_cols = 12.0;       // cross-section groove width
  double edge_ramp_s = 0.15;           // onset/offset ramp entering a dwell

  // audio mix
  double tone_amplitude = 0.15;
  double cement_amplitude = 0.45;      // scaled by instantaneous depth
  double metal_amplitude = 0.12;
  double white_amplitude = 0.01;
  double cement_band_lo_hz = 2000.0, cement_band_hi_hz = 6000.0;
  double metal_band_lo_hz = 8000.0, metal_band_hi_hz = 12000.0;
  std::size_t band_sines = 48;
  double depth_ref_um = 1800.0;        // depth that saturates the cement band
};

struct SynthTrial {
  AudioClip audio;
  ErosionProfileSet profiles;
  // per frame: the generator's instantaneous peak depth before the
  // cross-section spread (diagnostic, not part of the dataset)
  std::vector<double> depth_track_um;
};

/// Deterministic synthetic trial: stairs schedule -> bell-curve depth draw ->
/// cross-section profile + audio whose band energies track the depth, with a
/// spectrally distinct metal-contact signature.
SynthTrial synthesize_trial(std::uint64_t seed, const StairsSchedule& schedule,
                            const GeneratorConfig& config);

/// Per-standoff (mean, std) of the dwell-interior peak depth. Used for the
/// depth-vs-standoff report and generator statistics.
struct SegmentDepthStat {
  double standoff_mm;
  double mean_um;
  double std_um;
};
std::vector<SegmentDepthStat> segment_depth_stats(const ErosionProfileSet& profiles,
                                                  const StairsSchedule& schedule);

struct CsvLoadResult {
  ErosionProfileSet profiles;
  std::size_t clamped_negatives = 0;  // values < 0 clamped, counted for auditability
  bool had_header = false;
};

/// One row per frame, 70 comma-separated reals in um; a single non-numeric
/// header row is auto-detected and skipped.
CsvLoadResult load_profiles_csv(const std::string& path);
void save_profiles_csv(const std::string& path, const ErosionProfileSet& profiles);

// Generic numeric CSV helpers shared by the CLI (predictions, features).
SequenceTensor load_matrix_csv(const std::string& path, std::size_t expect_channels = 0);
void save_matrix_csv(const std::string& path, const SequenceTensor& m);

/// Per-channel z-score statistics. `source_frames` records which rows the
/// stats were computed from so leakage checks can assert provenance.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // 1.0 where the channel had zero variance
  std::size_t source_frames = 0;
};

NormStats compute_norm_stats(const SequenceTensor& x);
SequenceTensor apply_norm(const SequenceTensor& x, const NormStats& stats);
SequenceTensor invert_norm(const SequenceTensor& x, const NormStats& stats);

/// Per-channel z-score; zero-variance channels are centered only. If `stats`
/// is null they are computed from x itself and returned.
std::pair<SequenceTensor, NormStats> normalize_features(const SequenceTensor& x,
                                                        const NormStats* stats = nullptr);

/// One synchronized trial ready for the model: mel columns 0-59, profile
/// columns 60-129. With profile_mask=false the profile columns are exactly 0.
struct AlignedSample {
  SequenceTensor input;      // [F x 130]
  SequenceTensor target_um;  // [F x 70]
  bool profile_mask = true;
};

/// Concatenates the (already normalized) mel and profile feature blocks and
/// attaches the raw-um targets. mask=false zero-fills the profile columns.
AlignedSample assemble_sample(const SequenceTensor& mel_features,
                              const SequenceTensor& profile_features,
                              const SequenceTensor& target_um, bool profile_mask);

/// Chronological split at floor(frames/2); no shuffling.
std::pair<std::size_t, std::size_t> split_train_test(std::size_t frames);

}  // namespace jetssm
