#include "focus/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "focus/ops.hpp"
#include "focus/random.hpp"

namespace focus::bench {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class F>
Timing measure(int repeats, F&& fn) {
  std::vector<double> secs;
  Timing t;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    flop_counter() = 0;
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    t.flops = flop_counter();
  }
  std::sort(secs.begin(), secs.end());
  t.seconds = secs[secs.size() / 2];
  return t;
}

}  // namespace

FocusConfig bench_config(int64_t L, int64_t width, int64_t chunk) {
  FocusConfig cfg;
  cfg.seq_len = L;
  cfg.width = cfg.att_width = width;
  cfg.nfft = next_power_of_two((L + 3) / 4);
  cfg.filters = 1;
  cfg.chunk = std::min(chunk, L);
  cfg.oversampling = 4;
  cfg.hidden = 8;
  cfg.n_layers = 1;
  cfg.validate();
  return cfg;
}

Timing time_focus_forward(int64_t L, int64_t width, int64_t chunk, int repeats, uint64_t seed) {
  const FocusConfig cfg = bench_config(L, width, chunk);
  Rng rng(seed);
  FocusLayerParams p = init_focus_layer(rng, cfg);
  Tensor x = rng.normal_tensor({1, L, width}, 0.0, 1.0);
  return measure(repeats, [&] { focus_forward(x, p, cfg); });
}

Tensor full_causal_attention(const Tensor& x, const Tensor& q, const Tensor& k, const Tensor& v) {
  const int64_t L = x.dim(0), D = x.dim(1), A = q.dim(1);
  Eigen::Map<const RowMat> X(x.values().data(), L, D);
  Eigen::Map<const RowMat> Wq(q.values().data(), D, A), Wk(k.values().data(), D, A), Wv(v.values().data(), D, A);
  const double scale = 1.0 / std::sqrt(static_cast<double>(A));
  const RowMat Q = (X * Wq) * scale, K = X * Wk, V = X * Wv;
  Tensor out = Tensor::zeros({L, A});
  Eigen::Map<RowMat> Y(out.values().data(), L, A);
  // Tiled pass with a running softmax so every tile stays in cache.
  constexpr int64_t kRows = 64, kCols = 256;
  RowMat S, acc;
  Eigen::VectorXd run_max, run_sum;
  for (int64_t r0 = 0; r0 < L; r0 += kRows) {
    const int64_t rows = std::min(kRows, L - r0);
    acc.setZero(rows, A);
    run_max.setConstant(rows, -std::numeric_limits<double>::infinity());
    run_sum.setZero(rows);
    for (int64_t c0 = 0; c0 < r0 + rows; c0 += kCols) {
      const int64_t cols = std::min(kCols, r0 + rows - c0);
      S.noalias() = Q.middleRows(r0, rows) * K.middleRows(c0, cols).transpose();
      for (int64_t i = 0; i < rows; ++i) {
        const int64_t valid = std::min(cols, r0 + i + 1 - c0);
        if (valid <= 0) {
          S.row(i).setZero();
          continue;
        }
        const double m_new = std::max(run_max(i), S.row(i).head(valid).maxCoeff());
        const double rescale = std::exp(run_max(i) - m_new);
        S.row(i).head(valid) = (S.row(i).head(valid).array() - m_new).exp();
        S.row(i).tail(cols - valid).setZero();
        run_sum(i) = run_sum(i) * rescale + S.row(i).sum();
        acc.row(i) *= rescale;
        run_max(i) = m_new;
      }
      acc.noalias() += S * V.middleRows(c0, cols);
    }
    Y.middleRows(r0, rows) = acc.array().colwise() / run_sum.array();
  }
  flop_counter() += static_cast<uint64_t>(6 * L * D * A + 4 * L * L * A);
  return out;
}

Timing time_full_attention(int64_t L, int64_t width, int repeats, uint64_t seed) {
  Rng rng(seed);
  const double b = xavier_bound(width, width);
  Tensor q = rng.uniform_tensor({width, width}, -b, b), k = rng.uniform_tensor({width, width}, -b, b),
         v = rng.uniform_tensor({width, width}, -b, b);
  Tensor x = rng.normal_tensor({L, width}, 0.0, 1.0);
  return measure(repeats, [&] { full_causal_attention(x, q, k, v); });
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need at least two paired points");
  double mx = 0, my = 0;
  const auto n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace focus::bench
