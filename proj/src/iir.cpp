#include "focus/iir.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace focus::iir {

void IirCoeffs::validate() const {
  if (!theta.defined() || theta.rank() < 4 || theta.dim(-1) != 2 || theta.is_complex()) {
    throw DimensionError("IIR coefficients must be real (..., nbins, D, F, 2), got " +
                         (theta.defined() ? shape_str(theta.shape()) : std::string("undefined")));
  }
}

bool IirCoeffs::in_open_unit_interval() const {
  for (double v : theta.values()) {
    if (!(v > 0.0 && v < 1.0)) return false;
  }
  return true;
}

Theta IirCoeffs::at(std::span<const int64_t> index) const {
  const Shape& s = theta.shape();
  if (index.size() + 1 != s.size()) throw DimensionError("IirCoeffs::at: index rank mismatch");
  int64_t flat = 0;
  for (size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= s[i]) throw DimensionError("IirCoeffs::at: index out of range");
    flat = flat * s[i] + index[i];
  }
  auto v = theta.values();
  return {v[static_cast<size_t>(2 * flat)], v[static_cast<size_t>(2 * flat + 1)]};
}

cplx freq_response(Theta theta, double f) {
  const double w = 2.0 * std::numbers::pi * f;
  const cplx s = std::polar(1.0, -w);
  return 1.0 / (1.0 + theta.t0 * s + theta.t1 * s * s);
}

std::array<cplx, 2> poles(Theta theta) {
  const cplx root = std::sqrt(cplx(theta.t0 * theta.t0 - 4.0 * theta.t1, 0.0));
  return {(-theta.t0 - root) / 2.0, (-theta.t0 + root) / 2.0};
}

double max_pole_modulus(Theta theta) {
  const auto p = poles(theta);
  return std::max(std::abs(p[0]), std::abs(p[1]));
}

bool is_underdamped(Theta theta) { return theta.t0 * theta.t0 < 4.0 * theta.t1; }

ImpulseParams impulse_params(Theta theta) {
  ImpulseParams p;
  p.discriminant = theta.t0 * theta.t0 - 4.0 * theta.t1;
  p.underdamped = p.discriminant < 0.0;
  const auto z = poles(theta);
  const cplx dominant = std::abs(z[0]) >= std::abs(z[1]) ? z[0] : z[1];
  p.pole_modulus = std::abs(dominant);
  p.oscillation = std::abs(std::arg(dominant));
  p.time_constant = p.pole_modulus > 0.0 && p.pole_modulus < 1.0
                        ? -1.0 / std::log(p.pole_modulus)
                        : (p.pole_modulus == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return p;
}

ContinuousView continuous_view(Theta theta) {
  const double a = theta.t1;
  const double b = theta.t0;
  ContinuousView v;
  v.discriminant = b * b - 4.0 * a;
  if (a != 0.0) {
    v.decay_rate = b / (2.0 * a);
    if (v.discriminant < 0.0) v.sine_frequency = std::sqrt(-v.discriminant) / (2.0 * a);
  }
  return v;
}

std::vector<double> impulse_response(Theta theta, int n_steps) {
  if (n_steps < 1) throw ContractError("impulse_response: n_steps must be >= 1");
  std::vector<double> h(static_cast<size_t>(n_steps), 0.0);
  h[0] = 1.0;
  for (size_t t = 1; t < h.size(); ++t) {
    h[t] = 0.0 - theta.t0 * h[t - 1] - (t >= 2 ? theta.t1 * h[t - 2] : 0.0);
  }
  return h;
}

std::vector<double> apply_iir_recurrent(const Biquad& f, std::span<const double> x) {
  std::vector<double> y(x.size(), 0.0);
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (size_t t = 0; t < x.size(); ++t) {
    const double v = f.b0 * x[t] + f.b1 * x1 + f.b2 * x2 - f.a1 * y1 - f.a2 * y2;
    y[t] = v;
    x2 = x1;
    x1 = x[t];
    y2 = y1;
    y1 = v;
  }
  return y;
}

Biquad ssm_to_iir(const SsmScalars& s) {
  return Biquad{s.C * s.B + s.D, -s.A * s.D, 0.0, -s.A, 0.0};
}

Tensor conj_freq_response(const Tensor& theta, int64_t nfft) {
  if (theta.is_complex() || theta.rank() < 1 || theta.dim(-1) != 2) {
    throw DimensionError("conj_freq_response: theta must be real (..., 2), got " +
                         shape_str(theta.shape()));
  }
  if (nfft < 1) throw ConfigError("conj_freq_response: nfft must be positive");
  const int64_t filters = theta.numel() / 2;
  Shape out_shape(theta.shape().begin(), theta.shape().end() - 1);
  out_shape.push_back(nfft);
  Tensor out = Tensor::zeros(out_shape, DType::Complex128);

  // w_k = conj(e^{-j 2 pi k / N}); conj(H) = 1 / (1 + t0 w + t1 w^2).
  std::vector<cplx> w(static_cast<size_t>(nfft));
  for (int64_t k = 0; k < nfft; ++k) {
    w[static_cast<size_t>(k)] =
        std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nfft));
  }
  auto T = theta.values();
  auto O = out.cvalues();
  for (int64_t i = 0; i < filters; ++i) {
    const double t0 = T[static_cast<size_t>(2 * i)];
    const double t1 = T[static_cast<size_t>(2 * i + 1)];
    for (int64_t k = 0; k < nfft; ++k) {
      const cplx wk = w[static_cast<size_t>(k)];
      O[static_cast<size_t>(i * nfft + k)] = 1.0 / (1.0 + t0 * wk + t1 * wk * wk);
    }
  }
  flop_counter() += static_cast<uint64_t>(12 * filters * nfft);

  record_op(out, {theta}, [theta, nfft, filters, w = std::move(w)](const Tensor& o) {
    Tensor tt = theta;
    auto G = o.cgrad();
    auto Hc = o.cvalues();
    auto GT = tt.grad_mut();
    for (int64_t i = 0; i < filters; ++i) {
      double g0 = 0.0, g1 = 0.0;
      for (int64_t k = 0; k < nfft; ++k) {
        const auto idx = static_cast<size_t>(i * nfft + k);
        const cplx wk = w[static_cast<size_t>(k)];
        const cplx h2 = Hc[idx] * Hc[idx];
        // d(1/den)/dt = -(d den/dt) / den^2
        g0 += (std::conj(G[idx]) * (-wk * h2)).real();
        g1 += (std::conj(G[idx]) * (-wk * wk * h2)).real();
      }
      GT[static_cast<size_t>(2 * i)] += g0;
      GT[static_cast<size_t>(2 * i + 1)] += g1;
    }
  });
  return out;
}

void write_impulse_csv(std::ostream& os, std::span<const Theta> filters, int n_steps) {
  std::vector<std::vector<double>> h;
  for (const auto& f : filters) h.push_back(impulse_response(f, n_steps));
  os << "index";
  for (size_t j = 0; j < filters.size(); ++j) os << ",filter" << j;
  os << '\n';
  for (int t = 0; t < n_steps; ++t) {
    os << t;
    for (const auto& col : h) os << ',' << col[static_cast<size_t>(t)];
    os << '\n';
  }
}

void write_freq_response_csv(std::ostream& os, std::span<const Theta> filters, int n_freqs) {
  os << "frequency";
  for (size_t j = 0; j < filters.size(); ++j) os << ",filter" << j;
  os << '\n';
  for (int k = 0; k < n_freqs; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(n_freqs);
    os << f;
    for (const auto& th : filters) os << ',' << std::abs(freq_response(th, f));
    os << '\n';
  }
}

}  // namespace focus::iir
