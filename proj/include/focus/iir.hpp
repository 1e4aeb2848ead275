#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "focus/tensor.hpp"

namespace focus::iir {

/// Feedback coefficients of one order-2 all-pole filter,
/// H(z) = 1 / (1 + t0 z^-1 + t1 z^-2).
struct Theta {
  double t0 = 0.0;
  double t1 = 0.0;
};

/// Direct-form order-2 difference equation
/// y[t] = b0 x[t] + b1 x[t-1] + b2 x[t-2] - a1 y[t-1] - a2 y[t-2].
struct Biquad {
  double b0 = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
};

/// Per-channel diagonal state-space scalars:
/// s[t] = A s[t-1] + B x[t],  y[t] = C s[t] + D x[t].
struct SsmScalars {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
};

/// A bank of filters shaped (..., nbins, D, F, 2). Entry [..., 0] is t0 and
/// [..., 1] is t1. Generated banks have every entry in (0, 1).
struct IirCoeffs {
  Tensor theta;

  int64_t nbins() const { return theta.dim(-4); }
  int64_t channels() const { return theta.dim(-3); }
  int64_t filters() const { return theta.dim(-2); }
  // Throws DimensionError unless the trailing axis has length 2 and rank >= 4.
  void validate() const;
  // True when every coefficient lies strictly inside (0, 1).
  bool in_open_unit_interval() const;
  Theta at(std::span<const int64_t> index) const;
};

// H(f) at normalized frequency f (cycles per sample).
cplx freq_response(Theta theta, double f);

// Roots of z^2 + t0 z + t1.
std::array<cplx, 2> poles(Theta theta);
double max_pole_modulus(Theta theta);

// t0^2 < 4 t1, i.e. the poles form a complex-conjugate pair.
bool is_underdamped(Theta theta);

// Diagnostics of the discrete impulse response derived from the poles.
struct ImpulseParams {
  double discriminant = 0.0;   // t0^2 - 4 t1
  double pole_modulus = 0.0;   // per-step decay factor of the envelope
  double oscillation = 0.0;    // pole angle in radians per sample
  double time_constant = 0.0;  // steps for the envelope to fall by 1/e
  bool underdamped = false;
};
ImpulseParams impulse_params(Theta theta);

// Continuous-time reading 1 / (a s^2 + b s + 1) with a = t1, b = t0: the
// discriminant b^2 - 4a, the envelope decay rate b / 2a and, when
// underdamped, the oscillation frequency sqrt(-discriminant) / 2a.
struct ContinuousView {
  double discriminant = 0.0;
  double decay_rate = 0.0;
  double sine_frequency = 0.0;
};
ContinuousView continuous_view(Theta theta);

// h[0] = 1, h[t] = -t0 h[t-1] - t1 h[t-2].
std::vector<double> impulse_response(Theta theta, int n_steps);

// Zero initial conditions; output has the length of x.
std::vector<double> apply_iir_recurrent(const Biquad& f, std::span<const double> x);

// Difference equation whose zero-state response equals the SSM's:
// b0 = C B + D, b1 = -A D, a1 = -A, b2 = a2 = 0.
Biquad ssm_to_iir(const SsmScalars& s);

/// Differentiable evaluation of conj(H(k / nfft)) for k = 0..nfft-1.
/// theta: real (..., 2) -> complex (..., nfft).
Tensor conj_freq_response(const Tensor& theta, int64_t nfft);

// CSV exports used by the CLI. Columns: index (or frequency), then one column
// per filter.
void write_impulse_csv(std::ostream& os, std::span<const Theta> filters, int n_steps);
void write_freq_response_csv(std::ostream& os, std::span<const Theta> filters, int n_freqs);

}  // namespace focus::iir
