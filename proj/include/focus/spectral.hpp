#pragma once

#include "focus/iir.hpp"
#include "focus/tensor.hpp"

namespace focus::spectral {

/// Per-bin spectra of a real sequence. Storage is channel-major,
/// data: complex (..., D, nbins, nfft), so each transform runs along the last
/// axis. Bin length equals nfft.
struct ChunkSpectrum {
  Tensor data;
  int64_t nbins = 0;
  int64_t nfft = 0;

  int64_t channels() const { return data.dim(-3); }
  // Unbatched accessor in (bin, frequency, channel) order.
  cplx at(int64_t bin, int64_t freq, int64_t channel) const;
};

// x: real (..., L, D). Throws ConfigError when L is not a multiple of nfft or
// nfft is not a power of two.
ChunkSpectrum chunk_fft(const Tensor& x, int64_t nfft);

// Inverse of chunk_fft before real projection: complex (..., L, D).
Tensor chunk_ifft_complex(const ChunkSpectrum& spec);

// Real part of chunk_ifft_complex.
Tensor chunk_ifft(const ChunkSpectrum& spec);

// Sum over the filter axis of conj(H) sampled at k / nfft, returned as
// complex (..., D, nbins, nfft). theta: (..., nbins, D, F, 2).
Tensor bank_response(const Tensor& theta, int64_t nfft);

// Filtered sequence before real projection, complex (..., L, D). Bin counts of
// spec and theta must agree (DimensionError otherwise).
Tensor synthesize(const ChunkSpectrum& spec, const Tensor& theta);

// Real part of synthesize.
Tensor apply_filters(const ChunkSpectrum& spec, const Tensor& theta);

// Full path from a time-domain sequence. When L is not a multiple of nfft the
// input is zero-padded on the right, filtered and truncated back to L; theta
// must then carry ceil(L / nfft) bins.
Tensor filter_sequence(const Tensor& x, const Tensor& theta, int64_t nfft);

// Bins needed to cover L samples.
int64_t bins_for(int64_t L, int64_t nfft);

}  // namespace focus::spectral
