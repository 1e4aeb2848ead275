#include "focus/inspect.hpp"

#include <algorithm>
#include <ostream>

#include "focus/spectral.hpp"

namespace focus::inspect {

FilterReport filter_report(const Tensor& theta, int64_t nfft) {
  if (theta.rank() != 4) throw DimensionError("filter_report: theta must be (nbins, D, F, 2)");
  const int64_t nbins = theta.dim(0), D = theta.dim(1);
  Tensor bank = spectral::bank_response(theta.detach(), nfft);  // (D, nbins, nfft)
  FilterReport r;
  r.nbins = nbins;
  r.nfft = nfft;
  r.mean_magnitude.assign(static_cast<size_t>(nfft), std::vector<double>(static_cast<size_t>(nbins), 0.0));
  r.peak.assign(static_cast<size_t>(nbins), 0.0);
  auto H = bank.cvalues();
  for (int64_t d = 0; d < D; ++d) {
    for (int64_t b = 0; b < nbins; ++b) {
      for (int64_t k = 0; k < nfft; ++k) {
        const double mag = std::abs(H[static_cast<size_t>((d * nbins + b) * nfft + k)]);
        r.mean_magnitude[static_cast<size_t>(k)][static_cast<size_t>(b)] += mag / static_cast<double>(D);
        r.peak[static_cast<size_t>(b)] = std::max(r.peak[static_cast<size_t>(b)], mag);
      }
    }
  }
  return r;
}

void write_magnitude_csv(std::ostream& os, const FilterReport& r) {
  os << "freq";
  for (int64_t b = 0; b < r.nbins; ++b) os << ",bin" << b;
  os << '\n';
  for (int64_t k = 0; k < r.nfft; ++k) {
    os << k;
    for (double v : r.mean_magnitude[static_cast<size_t>(k)]) os << ',' << v;
    os << '\n';
  }
}

void write_peak_csv(std::ostream& os, const FilterReport& r) {
  os << "bin,peak\n";
  for (int64_t b = 0; b < r.nbins; ++b) os << b << ',' << r.peak[static_cast<size_t>(b)] << '\n';
}

double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty list");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double focus_ratio(const FilterReport& r, int64_t bin) {
  if (bin < 0 || bin >= r.nbins) throw DimensionError("focus_ratio: bin out of range");
  return r.peak[static_cast<size_t>(bin)] / median(r.peak);
}

}  // namespace focus::inspect
