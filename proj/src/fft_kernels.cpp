#include "fft_kernels.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace focus::detail {

namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int64_t n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(static_cast<size_t>(n));
    auto* out = fftw_alloc_complex(static_cast<size_t>(n));
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int64_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

void dft_rows(const cplx* in, cplx* out, int64_t rows, int64_t n, int sign) {
  if (rows == 0 || n == 0) return;
  fftw_plan plan = cache().get(n, sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD);
  std::vector<cplx> scratch;
  const bool alias = in == out;
  if (alias) scratch.resize(static_cast<size_t>(n));
  for (int64_t r = 0; r < rows; ++r) {
    const cplx* src = in + r * n;
    cplx* dst = out + r * n;
    if (alias) {
      std::copy(src, src + n, scratch.begin());
      src = scratch.data();
    }
    // Out-of-place complex plans leave their input intact.
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(src)),
                     reinterpret_cast<fftw_complex*>(dst));
  }
  flop_counter() += static_cast<uint64_t>(5.0 * static_cast<double>(rows * n) *
                                          std::log2(static_cast<double>(n)));
}

}  // namespace focus::detail
