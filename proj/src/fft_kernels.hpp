#pragma once

#include <cstdint>

#include "focus/tensor.hpp"

namespace focus::detail {

// Row-wise unnormalized complex DFT of `rows` contiguous rows of length n.
// sign = -1 is the forward transform, +1 the (unscaled) backward transform.
// `in` and `out` may alias.
void dft_rows(const cplx* in, cplx* out, int64_t rows, int64_t n, int sign);

}  // namespace focus::detail
