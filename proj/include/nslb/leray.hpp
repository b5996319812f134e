#pragma once

#include "nslb/spectral_core.hpp"

namespace nslb {

// f - k (k.f)/|k|^2 mode by mode; alpha = 0 is left untouched.
SpectralField leray_project(const SpectralField& f);

// Modes of dp/dx_i for the pressure of a divergence-free velocity v, computed
// from the divergence form -Delta p = sum_{j,k} d_j d_k (v_j v_k). Zero mean.
SpectralField pressure_gradient_modes(const SpectralField& v, int i);

// Zero-mean pressure solving Delta p = -sum_{i,j} v_{i,j} v_{j,i}.
SpectralField poisson_pressure(const SpectralField& v);

// Sum over grid points of |Delta p + sum_{i,j} v_{i,j} v_{j,i}|^2, square-rooted (grid L2).
double poisson_residual(const SpectralField& v, const SpectralField& p);

}  // namespace nslb
