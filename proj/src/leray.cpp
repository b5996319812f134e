#include "nslb/leray.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace nslb {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDivergenceWarning = 1e-8;

void warn_if_divergent(const SpectralField& v, const char* where) {
  double div = max_divergence_mode(v);
  if (div > kDivergenceWarning)
    std::clog << "warning: " << where << " received a field with divergence " << div << "\n";
}

void require_velocity(const SpectralField& v) {
  if (v.components() != v.grid().dim()) throw std::invalid_argument("velocity needs n components");
}

// Solves Delta p = s mode-wise with zero mean.
SpectralField inverse_laplacian(SpectralField s) {
  const TorusGrid& grid = s.grid();
  auto m = s.component(0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    MultiIndex k = grid.wavevector(j);
    double k2 = 0.0;
    for (int d = 0; d < grid.dim(); ++d) k2 += double(k[d]) * k[d];
    m[j] = k2 == 0.0 ? Complex(0.0) : m[j] / (-kTwoPi * kTwoPi * k2);
  }
  return s;
}

}  // namespace

SpectralField leray_project(const SpectralField& f) {
  require_velocity(f);
  const TorusGrid& grid = f.grid();
  const int n = grid.dim();
  SpectralField out = f;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    MultiIndex index = grid.unflatten(j);
    double k[3] = {0.0, 0.0, 0.0};
    double k2 = 0.0;
    for (int d = 0; d < n; ++d) {
      k[d] = grid.derivative_wavenumber(index[d]);
      k2 += k[d] * k[d];
    }
    if (k2 == 0.0) continue;
    Complex dot = 0.0;
    for (int d = 0; d < n; ++d) dot += k[d] * f.at(d, j);
    for (int d = 0; d < n; ++d) out.at(d, j) -= k[d] * dot / k2;
  }
  return out;
}

SpectralField pressure_gradient_modes(const SpectralField& v, int i) {
  require_velocity(v);
  warn_if_divergent(v, "pressure_gradient_modes");
  const TorusGrid& grid = v.grid();
  const int n = grid.dim();
  // Delta p = -sum_{j,k} d_j d_k (v_j v_k)
  SpectralField source(grid, 1);
  for (int j = 0; j < n; ++j) {
    for (int k = j; k < n; ++k) {
      SpectralField product = dealiased_product(component_of(v, j), component_of(v, k));
      SpectralField term = derivative(derivative(product, 0, j), 0, k);
      source.axpy(j == k ? -1.0 : -2.0, term);
    }
  }
  return derivative(inverse_laplacian(std::move(source)), 0, i);
}

SpectralField poisson_pressure(const SpectralField& v) {
  require_velocity(v);
  const TorusGrid& grid = v.grid();
  const int n = grid.dim();
  SpectralField source(grid, 1);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      source.axpy(-1.0, dealiased_product(derivative(v, a, b), derivative(v, b, a)));
  return inverse_laplacian(std::move(source));
}

double poisson_residual(const SpectralField& v, const SpectralField& p) {
  const TorusGrid& grid = v.grid();
  const int n = grid.dim();
  SpectralField r = laplacian(p);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) r += dealiased_product(derivative(v, a, b), derivative(v, b, a));
  return sobolev_norm(r, 0.0);
}

}  // namespace nslb
