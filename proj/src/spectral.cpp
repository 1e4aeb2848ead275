#include "focus/spectral.hpp"

#include <numeric>

#include "focus/ops.hpp"

namespace focus::spectral {

namespace {

// Moves the last two axes (L, D) to (D, L) and splits L into (nbins, nfft).
std::vector<int> swap_last_two(int rank) {
  std::vector<int> perm(static_cast<size_t>(rank));
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[static_cast<size_t>(rank - 1)], perm[static_cast<size_t>(rank - 2)]);
  return perm;
}

void check_sequence(const Tensor& x, const char* who) {
  if (x.rank() < 2 || x.is_complex()) {
    throw DimensionError(std::string(who) + ": expected real (..., L, D), got " + shape_str(x.shape()));
  }
}

// (..., D, nbins, nfft) complex -> (..., L, D) complex.
Tensor merge_bins(const Tensor& t) {
  Shape s = t.shape();
  const auto r = s.size();
  Shape merged(s.begin(), s.end() - 2);
  merged.push_back(s[r - 2] * s[r - 1]);
  Tensor flat = reshape(t, merged);
  return permute(flat, swap_last_two(flat.rank()));
}

}  // namespace

cplx ChunkSpectrum::at(int64_t bin, int64_t freq, int64_t channel) const {
  if (data.rank() != 3) throw DimensionError("ChunkSpectrum::at needs an unbatched spectrum");
  return data.cat({channel, bin, freq});
}

int64_t bins_for(int64_t L, int64_t nfft) { return (L + nfft - 1) / nfft; }

ChunkSpectrum chunk_fft(const Tensor& x, int64_t nfft) {
  check_sequence(x, "chunk_fft");
  if (!is_power_of_two(nfft)) {
    throw ConfigError("chunk_fft: nfft must be a power of two, got " + std::to_string(nfft));
  }
  const int64_t L = x.dim(-2);
  if (L % nfft != 0) {
    throw ConfigError("chunk_fft: sequence length " + std::to_string(L) +
                      " is not a multiple of nfft " + std::to_string(nfft));
  }
  Tensor xt = permute(x, swap_last_two(x.rank()));
  Shape split(xt.shape().begin(), xt.shape().end() - 1);
  split.push_back(L / nfft);
  split.push_back(nfft);
  return ChunkSpectrum{fft_lastdim(reshape(xt, split)), L / nfft, nfft};
}

Tensor chunk_ifft_complex(const ChunkSpectrum& spec) { return merge_bins(ifft_lastdim(spec.data)); }

Tensor chunk_ifft(const ChunkSpectrum& spec) { return real_part(chunk_ifft_complex(spec)); }

Tensor bank_response(const Tensor& theta, int64_t nfft) {
  if (theta.rank() < 4 || theta.dim(-1) != 2) {
    throw DimensionError("bank_response: theta must be (..., nbins, D, F, 2), got " +
                         shape_str(theta.shape()));
  }
  // (..., nbins, D, F, nfft) -> sum over F -> (..., nbins, D, nfft) -> (..., D, nbins, nfft)
  Tensor h = sum_axis(iir::conj_freq_response(theta, nfft), -2);
  std::vector<int> perm(static_cast<size_t>(h.rank()));
  std::iota(perm.begin(), perm.end(), 0);
  const auto r = perm.size();
  std::swap(perm[r - 3], perm[r - 2]);
  return permute(h, perm);
}

Tensor synthesize(const ChunkSpectrum& spec, const Tensor& theta) {
  if (theta.rank() < 4 || theta.dim(-4) != spec.nbins || theta.dim(-3) != spec.channels()) {
    throw DimensionError("apply_filters: theta " + shape_str(theta.shape()) + " does not match " +
                         std::to_string(spec.nbins) + " bins of " + std::to_string(spec.channels()) +
                         " channels");
  }
  Tensor filtered = mul(spec.data, bank_response(theta, spec.nfft));
  return merge_bins(ifft_lastdim(filtered));
}

Tensor apply_filters(const ChunkSpectrum& spec, const Tensor& theta) {
  return real_part(synthesize(spec, theta));
}

Tensor filter_sequence(const Tensor& x, const Tensor& theta, int64_t nfft) {
  check_sequence(x, "filter_sequence");
  const int64_t L = x.dim(-2);
  const int64_t padded = bins_for(L, nfft) * nfft;
  if (padded == L) return apply_filters(chunk_fft(x, nfft), theta);
  Tensor xp = pad_axis(x, x.rank() - 2, 0, padded - L);
  return slice_axis(apply_filters(chunk_fft(xp, nfft), theta), x.rank() - 2, 0, L);
}

}  // namespace focus::spectral
