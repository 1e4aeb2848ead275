#pragma once

#include <iosfwd>
#include <vector>

#include "focus/tensor.hpp"

namespace focus::inspect {

/// Magnitude of each bin's summed filter bank |sum_f H_f(k / nfft)|.
struct FilterReport {
  int64_t nbins = 0;
  int64_t nfft = 0;
  std::vector<std::vector<double>> mean_magnitude;  // [freq][bin], mean over channels
  std::vector<double> peak;                         // per bin, max over channels and freqs
};

// theta: (nbins, D, F, 2) for a single sequence.
FilterReport filter_report(const Tensor& theta, int64_t nfft);

// Rows are frequency indices, columns bins.
void write_magnitude_csv(std::ostream& os, const FilterReport& r);
// bin,peak
void write_peak_csv(std::ostream& os, const FilterReport& r);

double median(std::vector<double> v);
// peak[bin] / median(peak)
double focus_ratio(const FilterReport& r, int64_t bin);

}  // namespace focus::inspect
