#include "nslb/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fft.hpp"

namespace nslb {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_same_shape(const SpectralField& a, const SpectralField& b) {
  if (!(a.grid() == b.grid()) || a.components() != b.components())
    throw std::invalid_argument("spectral fields have different shapes");
}

double wavenumber_squared(const TorusGrid& grid, std::size_t flat) {
  MultiIndex k = grid.wavevector(flat);
  double sum = 0.0;
  for (int d = 0; d < grid.dim(); ++d) sum += double(k[d]) * k[d];
  return sum;
}

}  // namespace

TorusGrid::TorusGrid(int dim, int modes) : dim_(dim), modes_(modes) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("torus dimension must be 2 or 3");
  if (modes < 8 || modes % 2 != 0)
    throw std::invalid_argument("modes per dimension must be even and at least 8");
  size_ = 1;
  for (int d = 0; d < dim; ++d) size_ *= static_cast<std::size_t>(modes);
}

MultiIndex TorusGrid::unflatten(std::size_t flat) const {
  MultiIndex index{0, 0, 0};
  for (int d = dim_ - 1; d >= 0; --d) {
    index[d] = static_cast<int>(flat % modes_);
    flat /= modes_;
  }
  return index;
}

std::size_t TorusGrid::flatten(const MultiIndex& index) const {
  std::size_t flat = 0;
  for (int d = 0; d < dim_; ++d) {
    int k = ((index[d] % modes_) + modes_) % modes_;
    flat = flat * modes_ + k;
  }
  return flat;
}

MultiIndex TorusGrid::wavevector(std::size_t flat) const {
  MultiIndex index = unflatten(flat);
  for (int d = 0; d < dim_; ++d) index[d] = wavenumber(index[d]);
  return index;
}

std::size_t TorusGrid::conjugate_index(std::size_t flat) const {
  MultiIndex index = unflatten(flat);
  for (int d = 0; d < dim_; ++d) index[d] = -index[d];
  return flatten(index);
}

double TorusGrid::coordinate(int index) const {
  double x = static_cast<double>(index) / modes_;
  return x >= 0.5 ? x - 1.0 : x;
}

PhysicalField::PhysicalField(const TorusGrid& grid, int components)
    : grid_(grid), components_(components), values_(grid.size() * components, 0.0) {}

std::span<double> PhysicalField::component(int c) {
  return {values_.data() + c * grid_.size(), grid_.size()};
}

std::span<const double> PhysicalField::component(int c) const {
  return {values_.data() + c * grid_.size(), grid_.size()};
}

SpectralField::SpectralField(const TorusGrid& grid, int components)
    : grid_(grid), components_(components), modes_(grid.size() * components, Complex(0.0, 0.0)) {}

std::span<Complex> SpectralField::component(int c) {
  return {modes_.data() + c * grid_.size(), grid_.size()};
}

std::span<const Complex> SpectralField::component(int c) const {
  return {modes_.data() + c * grid_.size(), grid_.size()};
}

void SpectralField::enforce_conjugate_symmetry() {
  const std::size_t n = grid_.size();
  for (int c = 0; c < components_; ++c) {
    auto v = component(c);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t m = grid_.conjugate_index(j);
      if (m < j) continue;
      if (m == j) {
        v[j] = Complex(v[j].real(), 0.0);
      } else {
        Complex avg = 0.5 * (v[j] + std::conj(v[m]));
        v[j] = avg;
        v[m] = std::conj(avg);
      }
    }
  }
}

double SpectralField::max_conjugate_asymmetry() const {
  double worst = 0.0;
  for (int c = 0; c < components_; ++c) {
    auto v = component(c);
    for (std::size_t j = 0; j < grid_.size(); ++j)
      worst = std::max(worst, std::abs(v[j] - std::conj(v[grid_.conjugate_index(j)])));
  }
  return worst;
}

double SpectralField::max_abs() const {
  double worst = 0.0;
  for (const Complex& z : modes_) worst = std::max(worst, std::abs(z));
  return worst;
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  require_same_shape(*this, other);
  for (std::size_t j = 0; j < modes_.size(); ++j) modes_[j] += other.modes_[j];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  require_same_shape(*this, other);
  for (std::size_t j = 0; j < modes_.size(); ++j) modes_[j] -= other.modes_[j];
  return *this;
}

SpectralField& SpectralField::operator*=(double scale) {
  for (Complex& z : modes_) z *= scale;
  return *this;
}

void SpectralField::axpy(double scale, const SpectralField& other) {
  require_same_shape(*this, other);
  for (std::size_t j = 0; j < modes_.size(); ++j) modes_[j] += scale * other.modes_[j];
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double scale, SpectralField a) { return a *= scale; }

SpectralField to_modes(const PhysicalField& f) {
  for (double x : f.values())
    if (!std::isfinite(x)) throw std::domain_error("to_modes: non-finite grid value");
  SpectralField v(f.grid(), f.components());
  for (int c = 0; c < f.components(); ++c) detail::forward_fft(f.grid(), f.component(c), v.component(c));
  v.enforce_conjugate_symmetry();
  return v;
}

PhysicalField to_grid(const SpectralField& v) {
  PhysicalField f(v.grid(), v.components());
  for (int c = 0; c < v.components(); ++c) detail::inverse_fft(v.grid(), v.component(c), f.component(c));
  return f;
}

SpectralField component_of(const SpectralField& v, int i) {
  if (i < 0 || i >= v.components()) throw std::out_of_range("component index out of range");
  SpectralField out(v.grid(), 1);
  auto src = v.component(i);
  std::copy(src.begin(), src.end(), out.component(0).begin());
  return out;
}

SpectralField derivative(const SpectralField& v, int i, int k) {
  const TorusGrid& grid = v.grid();
  if (k < 0 || k >= grid.dim()) throw std::out_of_range("derivative direction out of range");
  SpectralField out = component_of(v, i);
  auto m = out.component(0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    int a = grid.derivative_wavenumber(grid.unflatten(j)[k]);
    m[j] *= Complex(0.0, kTwoPi * a);
  }
  return out;
}

SpectralField divergence(const SpectralField& v) {
  const TorusGrid& grid = v.grid();
  if (v.components() != grid.dim()) throw std::invalid_argument("divergence needs n components");
  SpectralField out(grid, 1);
  auto m = out.component(0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    MultiIndex index = grid.unflatten(j);
    Complex sum = 0.0;
    for (int k = 0; k < grid.dim(); ++k)
      sum += Complex(0.0, kTwoPi * grid.derivative_wavenumber(index[k])) * v.at(k, j);
    m[j] = sum;
  }
  return out;
}

SpectralField laplacian(const SpectralField& v) {
  SpectralField out = v;
  const TorusGrid& grid = v.grid();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double factor = -kTwoPi * kTwoPi * wavenumber_squared(grid, j);
    for (int c = 0; c < v.components(); ++c) out.at(c, j) *= factor;
  }
  return out;
}

SpectralField gradient(const SpectralField& scalar) {
  const TorusGrid& grid = scalar.grid();
  if (scalar.components() != 1) throw std::invalid_argument("gradient needs a scalar field");
  SpectralField out(grid, grid.dim());
  for (int k = 0; k < grid.dim(); ++k) {
    SpectralField d = derivative(scalar, 0, k);
    auto src = d.component(0);
    std::copy(src.begin(), src.end(), out.component(k).begin());
  }
  return out;
}

bool is_dealiased_mode(const TorusGrid& grid, std::size_t flat) {
  MultiIndex k = grid.wavevector(flat);
  for (int d = 0; d < grid.dim(); ++d)
    if (3 * std::abs(k[d]) >= grid.modes()) return true;
  return false;
}

SpectralField dealias(const SpectralField& v) {
  SpectralField out = v;
  const TorusGrid& grid = v.grid();
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (is_dealiased_mode(grid, j))
      for (int c = 0; c < v.components(); ++c) out.at(c, j) = 0.0;
  return out;
}

double sobolev_norm(const SpectralField& v, double s) {
  const TorusGrid& grid = v.grid();
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double weight = std::pow(1.0 + wavenumber_squared(grid, j), s);
    for (int c = 0; c < v.components(); ++c) sum += std::norm(v.at(c, j)) * weight;
  }
  return std::sqrt(sum);
}

double l2_norm(const PhysicalField& f) {
  double sum = 0.0;
  for (double x : f.values()) sum += x * x;
  return std::sqrt(sum / static_cast<double>(f.grid().size()));
}

double lp_norm(const PhysicalField& f, double p) {
  const TorusGrid& grid = f.grid();
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double mag2 = 0.0;
    for (int c = 0; c < f.components(); ++c) mag2 += f.at(c, j) * f.at(c, j);
    sum += std::pow(mag2, 0.5 * p);
  }
  return std::pow(sum / static_cast<double>(grid.size()), 1.0 / p);
}

double max_abs(const PhysicalField& f) {
  double worst = 0.0;
  for (double x : f.values()) worst = std::max(worst, std::abs(x));
  return worst;
}

double gradient_norm_squared(const SpectralField& v) {
  const TorusGrid& grid = v.grid();
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    MultiIndex index = grid.unflatten(j);
    double k2 = 0.0;
    for (int d = 0; d < grid.dim(); ++d) {
      double a = grid.derivative_wavenumber(index[d]);
      k2 += a * a;
    }
    for (int c = 0; c < v.components(); ++c) sum += kTwoPi * kTwoPi * k2 * std::norm(v.at(c, j));
  }
  return sum;
}

double max_divergence_mode(const SpectralField& v) { return divergence(v).max_abs(); }

std::vector<double> shell_spectrum(const SpectralField& v) {
  const TorusGrid& grid = v.grid();
  int shells = static_cast<int>(std::ceil(std::sqrt(double(grid.dim())) * grid.modes() / 2)) + 1;
  std::vector<double> spectrum(shells, 0.0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    int shell = static_cast<int>(std::lround(std::sqrt(wavenumber_squared(grid, j))));
    for (int c = 0; c < v.components(); ++c) spectrum[shell] += std::norm(v.at(c, j));
  }
  return spectrum;
}

SpectralField dealiased_product(const SpectralField& a, const SpectralField& b) {
  if (!(a.grid() == b.grid()) || a.components() != 1 || b.components() != 1)
    throw std::invalid_argument("dealiased_product needs scalar fields on one grid");
  PhysicalField fa = to_grid(dealias(a));
  PhysicalField fb = to_grid(dealias(b));
  for (std::size_t j = 0; j < fa.values().size(); ++j) fa.values()[j] *= fb.values()[j];
  return dealias(to_modes(fa));
}

double evaluate_at(const SpectralField& v, int i, std::span<const double> x) {
  const TorusGrid& grid = v.grid();
  if (static_cast<int>(x.size()) != grid.dim()) throw std::invalid_argument("point dimension mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    MultiIndex k = grid.wavevector(j);
    double phase = 0.0;
    for (int d = 0; d < grid.dim(); ++d) phase += k[d] * x[d];
    Complex z = v.at(i, j) * std::polar(1.0, kTwoPi * phase);
    sum += z.real();
  }
  return sum;
}

}  // namespace nslb
