#include "jetssm/ssm_kernel.hpp"

#include <algorithm>
#include <cmath>

#include "jetssm/fft.hpp"

namespace jetssm {

namespace {

constexpr double kSeriesThreshold = 1e-8;  // |dt*a| below which the ZOH b_bar uses the series

double real_convention(std::complex<double> s, bool conj_pairs) {
  return conj_pairs ? 2.0 * s.real() : s.real();
}

void check_sizes(std::size_t n, std::size_t nb, std::size_t nc, const char* what) {
  if (n == 0) throw ValidationError(std::string(what) + ": empty state");
  if (nb != n || nc != n)
    throw ShapeError(std::string(what) + ": a/b/c length mismatch");
}

}  // namespace

DiagonalSSM::DiagonalSSM(std::vector<double> log_neg_real, std::vector<double> imag,
                         std::vector<std::complex<double>> b,
                         std::vector<std::complex<double>> c, double log_dt, bool conj_pairs)
    : log_neg_real_(std::move(log_neg_real)),
      imag_(std::move(imag)),
      b_(std::move(b)),
      c_(std::move(c)),
      log_dt_(log_dt),
      conj_pairs_(conj_pairs) {
  if (log_neg_real_.empty()) throw ValidationError("DiagonalSSM: empty state");
  if (imag_.size() != log_neg_real_.size() || b_.size() != log_neg_real_.size() ||
      c_.size() != log_neg_real_.size())
    throw ShapeError("DiagonalSSM: parameter vector lengths differ");
  if (!std::isfinite(log_dt_)) throw ValidationError("DiagonalSSM: log_dt not finite");
  for (std::size_t n = 0; n < log_neg_real_.size(); ++n) {
    if (!std::isfinite(log_neg_real_[n]) || !std::isfinite(imag_[n]) ||
        !std::isfinite(b_[n].real()) || !std::isfinite(b_[n].imag()) ||
        !std::isfinite(c_[n].real()) || !std::isfinite(c_[n].imag()))
      throw ValidationError("DiagonalSSM: non-finite parameter");
  }
}

DiagonalSSM DiagonalSSM::default_init(std::size_t n_state, double dt, bool conj_pairs) {
  if (n_state == 0) throw ValidationError("default_init: n_state must be positive");
  if (conj_pairs && n_state % 2 != 0)
    throw ValidationError("default_init: n_state must be even with conjugate pairs");
  const std::size_t stored = conj_pairs ? n_state / 2 : n_state;
  const double pi = 3.141592653589793238462643383279502884;
  std::vector<double> w(stored, std::log(0.5));  // Re(a) = -1/2
  std::vector<double> v(stored);
  for (std::size_t n = 0; n < stored; ++n) v[n] = pi * static_cast<double>(n);
  std::vector<std::complex<double>> ones(stored, {1.0, 0.0});
  if (!(dt > 0.0)) throw ValidationError("default_init: dt must be positive");
  return DiagonalSSM(std::move(w), std::move(v), ones, ones, std::log(dt), conj_pairs);
}

DiscreteSSM discretize_zoh_raw(const std::vector<std::complex<double>>& a,
                               const std::vector<std::complex<double>>& b,
                               const std::vector<std::complex<double>>& c, double dt,
                               bool conj_pairs) {
  check_sizes(a.size(), b.size(), c.size(), "discretize_zoh");
  DiscreteSSM out;
  out.method = Discretization::ZOH;
  out.conj_pairs = conj_pairs;
  out.c = c;
  out.a_bar.resize(a.size());
  out.b_bar.resize(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const std::complex<double> da = dt * a[n];
    const std::complex<double> e = std::exp(da);
    out.a_bar[n] = e;
    if (std::abs(da) < kSeriesThreshold) {
      // (e^{da}-1)/a = dt (1 + da/2 + da^2/6 + ...); avoids 0/0 cancellation
      out.b_bar[n] = dt * b[n] * (1.0 + da / 2.0 + da * da / 6.0);
    } else {
      out.b_bar[n] = (e - 1.0) / a[n] * b[n];
    }
  }
  return out;
}

DiscreteSSM discretize_bilinear_raw(const std::vector<std::complex<double>>& a,
                                    const std::vector<std::complex<double>>& b,
                                    const std::vector<std::complex<double>>& c, double dt,
                                    bool conj_pairs) {
  check_sizes(a.size(), b.size(), c.size(), "discretize_bilinear");
  DiscreteSSM out;
  out.method = Discretization::Bilinear;
  out.conj_pairs = conj_pairs;
  out.c = c;
  out.a_bar.resize(a.size());
  out.b_bar.resize(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const std::complex<double> half = 0.5 * dt * a[n];
    const std::complex<double> denom = 1.0 - half;
    out.a_bar[n] = (1.0 + half) / denom;
    out.b_bar[n] = dt * b[n] / denom;
  }
  return out;
}

namespace {
std::vector<std::complex<double>> a_vector(const DiagonalSSM& ssm) {
  std::vector<std::complex<double>> a(ssm.stored_size());
  for (std::size_t n = 0; n < a.size(); ++n) a[n] = ssm.a(n);
  return a;
}
}  // namespace

DiscreteSSM discretize_zoh(const DiagonalSSM& ssm) {
  return discretize_zoh_raw(a_vector(ssm), ssm.b(), ssm.c(), ssm.dt(), ssm.conj_pairs());
}

DiscreteSSM discretize_bilinear(const DiagonalSSM& ssm) {
  return discretize_bilinear_raw(a_vector(ssm), ssm.b(), ssm.c(), ssm.dt(), ssm.conj_pairs());
}

DiscreteSSM discretize(const DiagonalSSM& ssm, Discretization method) {
  return method == Discretization::ZOH ? discretize_zoh(ssm) : discretize_bilinear(ssm);
}

double continuous_kernel(const DiagonalSSM& ssm, double t) {
  if (!std::isfinite(t)) throw ValidationError("continuous_kernel: t must be finite");
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t n = 0; n < ssm.stored_size(); ++n)
    acc += ssm.c()[n] * std::exp(t * ssm.a(n)) * ssm.b()[n];
  return real_convention(acc, ssm.conj_pairs());
}

Kernel vandermonde_kernel(const DiscreteSSM& dssm, std::size_t length, std::size_t chunk) {
  if (length == 0) throw ValidationError("vandermonde_kernel: length must be >= 1");
  if (chunk == 0) chunk = 1024;
  const std::size_t m = dssm.stored_size();

  std::vector<std::complex<double>> coeff(m);  // b_bar o c
  for (std::size_t n = 0; n < m; ++n) coeff[n] = dssm.c[n] * dssm.b_bar[n];

  Kernel out;
  out.k.resize(length);
  std::vector<std::complex<double>> power(m);
  for (std::size_t base = 0; base < length; base += chunk) {
    // restart the running power from an exact pow at each chunk boundary to
    // keep drift independent of L
    for (std::size_t n = 0; n < m; ++n)
      power[n] = base == 0 ? std::complex<double>(1.0, 0.0)
                           : std::pow(dssm.a_bar[n], static_cast<double>(base));
    const std::size_t end = std::min(length, base + chunk);
    for (std::size_t l = base; l < end; ++l) {
      std::complex<double> acc(0.0, 0.0);
      for (std::size_t n = 0; n < m; ++n) {
        acc += coeff[n] * power[n];
        power[n] *= dssm.a_bar[n];
      }
      out.k[l] = real_convention(acc, dssm.conj_pairs);
    }
  }
  return out;
}

std::vector<double> causal_conv(const std::vector<double>& u, const Kernel& k) {
  if (u.size() != k.length())
    throw ShapeError("causal_conv: input length " + std::to_string(u.size()) +
                     " != kernel length " + std::to_string(k.length()));
  std::vector<double> full = fft::linear_convolve(u, k.k);
  full.resize(u.size());
  return full;
}

double recurrent_step(const DiscreteSSM& dssm, std::vector<std::complex<double>>& state,
                      double u_k) {
  if (state.size() != dssm.stored_size())
    throw ShapeError("recurrent_step: state size mismatch");
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t n = 0; n < state.size(); ++n) {
    state[n] = dssm.a_bar[n] * state[n] + dssm.b_bar[n] * u_k;
    acc += dssm.c[n] * state[n];
  }
  return real_convention(acc, dssm.conj_pairs);
}

}  // namespace jetssm
