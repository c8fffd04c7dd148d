#include "jetssm/fft.hpp"

#include <cmath>

namespace jetssm::fft {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void transform(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double pi = 3.141592653589793238462643383279502884;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

std::vector<double> linear_convolve(const std::vector<double>& u, const std::vector<double>& k) {
  if (u.empty() || k.empty()) return {};
  const std::size_t out_len = u.size() + k.size() - 1;
  const std::size_t n = next_pow2(out_len);
  std::vector<std::complex<double>> fu(n), fk(n);
  for (std::size_t i = 0; i < u.size(); ++i) fu[i] = u[i];
  for (std::size_t i = 0; i < k.size(); ++i) fk[i] = k[i];
  transform(fu, false);
  transform(fk, false);
  for (std::size_t i = 0; i < n; ++i) fu[i] *= fk[i];
  transform(fu, true);
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = fu[i].real();
  return out;
}

}  // namespace jetssm::fft
