#pragma once

#include <complex>
#include <span>

#include "nslb/spectral_core.hpp"

namespace nslb::detail {

// Forward transform with 1/N^n normalization: out_alpha = N^-n sum f e^{-2 pi i alpha.x}.
void forward_fft(const TorusGrid& grid, std::span<const double> in, std::span<Complex> out);
// Inverse transform without normalization; the real part is returned.
void inverse_fft(const TorusGrid& grid, std::span<const Complex> in, std::span<double> out);

}  // namespace nslb::detail
