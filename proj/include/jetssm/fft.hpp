#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace jetssm::fft {

std::size_t next_pow2(std::size_t n);

// In-place iterative radix-2 transform; a.size() must be a power of two.
// inverse=true applies the 1/n scaling.
void transform(std::vector<std::complex<double>>& a, bool inverse);

// Full linear convolution of u and k (length u+k-1) via zero-padded FFT.
std::vector<double> linear_convolve(const std::vector<double>& u, const std::vector<double>& k);

}  // namespace jetssm::fft
