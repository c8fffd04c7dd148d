#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jetssm/errors.hpp"

namespace jetssm {

// Time-major [frames x channels] array of doubles: the carrier for features,
// targets and layer activations throughout the pipeline.
struct SequenceTensor {
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::vector<double> data;  // row-major

  SequenceTensor() = default;
  SequenceTensor(std::size_t f, std::size_t c, double fill = 0.0)
      : frames(f), channels(c), data(f * c, fill) {}

  double& at(std::size_t t, std::size_t ch) { return data[t * channels + ch]; }
  double at(std::size_t t, std::size_t ch) const { return data[t * channels + ch]; }

  double* row(std::size_t t) { return data.data() + t * channels; }
  const double* row(std::size_t t) const { return data.data() + t * channels; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_channels(const SequenceTensor& x, std::size_t ch, const std::string& what) {
  if (x.channels != ch)
    throw ShapeError(what + ": expected " + std::to_string(ch) + " channels, got " +
                     std::to_string(x.channels));
}

inline void require_same_shape(const SequenceTensor& a, const SequenceTensor& b,
                               const std::string& what) {
  if (a.frames != b.frames || a.channels != b.channels)
    throw ShapeError(what + ": shapes [" + std::to_string(a.frames) + "x" +
                     std::to_string(a.channels) + "] and [" + std::to_string(b.frames) + "x" +
                     std::to_string(b.channels) + "] differ");
}

inline SequenceTensor slice_rows(const SequenceTensor& x, std::size_t begin, std::size_t end) {
  SequenceTensor out(end - begin, x.channels);
  std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(begin * x.channels),
            x.data.begin() + static_cast<std::ptrdiff_t>(end * x.channels), out.data.begin());
  return out;
}

}  // namespace jetssm
