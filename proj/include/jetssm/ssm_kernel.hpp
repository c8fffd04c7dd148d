#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "jetssm/errors.hpp"

namespace jetssm {

enum class Discretization { ZOH, Bilinear };

/// Continuous-time diagonal state space system
///
///   x'(t) = diag(a) x(t) + b u(t),   y(t) = Re-convention(c . x(t))
///
/// The diagonal is stored as (log of the negated real part, imaginary part),
/// so Re(a_n) < 0 holds for every representable parameter value. With
/// `conj_pairs` set, the stored entries are conjugate-pair representatives:
/// the nominal state dimension is twice the stored length and the output
/// convention is 2*Re(sum) instead of Re(sum), which keeps kernels real while
/// halving the parameter count.
class DiagonalSSM {
 public:
  DiagonalSSM(std::vector<double> log_neg_real, std::vector<double> imag,
              std::vector<std::complex<double>> b, std::vector<std::complex<double>> c,
              double log_dt, bool conj_pairs);

  /// a_n = -1/2 + i*pi*n over stored indices, b = c = 1.
  static DiagonalSSM default_init(std::size_t n_state, double dt, bool conj_pairs);

  std::size_t stored_size() const { return log_neg_real_.size(); }
  std::size_t n_state() const { return conj_pairs_ ? 2 * stored_size() : stored_size(); }
  bool conj_pairs() const { return conj_pairs_; }

  std::complex<double> a(std::size_t n) const {
    return {-std::exp(log_neg_real_[n]), imag_[n]};
  }
  const std::vector<std::complex<double>>& b() const { return b_; }
  const std::vector<std::complex<double>>& c() const { return c_; }
  double log_dt() const { return log_dt_; }
  double dt() const { return std::exp(log_dt_); }

 private:
  std::vector<double> log_neg_real_;
  std::vector<double> imag_;
  std::vector<std::complex<double>> b_;
  std::vector<std::complex<double>> c_;
  double log_dt_;
  bool conj_pairs_;
};

/// Discrete-time counterpart: x_{k+1} = diag(a_bar) x_k + b_bar u_k.
struct DiscreteSSM {
  std::vector<std::complex<double>> a_bar;
  std::vector<std::complex<double>> b_bar;
  std::vector<std::complex<double>> c;
  Discretization method = Discretization::ZOH;
  bool conj_pairs = false;

  std::size_t stored_size() const { return a_bar.size(); }
};

/// Causal convolution kernel samples (K_0 .. K_{L-1}).
struct Kernel {
  std::vector<double> k;
  std::size_t length() const { return k.size(); }
};

// Discretization without the log-space stability wrapper; used by the class
// overloads below and by boundary-case fixtures that need e.g. a = 0.
DiscreteSSM discretize_zoh_raw(const std::vector<std::complex<double>>& a,
                               const std::vector<std::complex<double>>& b,
                               const std::vector<std::complex<double>>& c, double dt,
                               bool conj_pairs);
DiscreteSSM discretize_bilinear_raw(const std::vector<std::complex<double>>& a,
                                    const std::vector<std::complex<double>>& b,
                                    const std::vector<std::complex<double>>& c, double dt,
                                    bool conj_pairs);

DiscreteSSM discretize_zoh(const DiagonalSSM& ssm);
DiscreteSSM discretize_bilinear(const DiagonalSSM& ssm);
DiscreteSSM discretize(const DiagonalSSM& ssm, Discretization method);

/// K(t) = Re-convention(sum_n c_n exp(t a_n) b_n); convergence oracle for the
/// discretizations, not a production path.
double continuous_kernel(const DiagonalSSM& ssm, double t);

/// K_l = Re-convention(sum_n c_n a_bar_n^l b_bar_n) for l = 0..length-1.
/// Evaluated as the (b_bar o c) . V_L(a_bar) product in chunks of the l axis,
/// so working memory stays O(stored + chunk) with no L x N intermediate.
Kernel vandermonde_kernel(const DiscreteSSM& dssm, std::size_t length, std::size_t chunk = 1024);

/// y_t = sum_{l<=t} k_l u_{t-l}, via zero-padded FFT. Lengths must match.
std::vector<double> causal_conv(const std::vector<double>& u, const Kernel& k);

/// One recurrence step; updates `state` in place and returns y_k.
double recurrent_step(const DiscreteSSM& dssm, std::vector<std::complex<double>>& state,
                      double u_k);

}  // namespace jetssm
