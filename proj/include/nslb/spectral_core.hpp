#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace nslb {

using Complex = std::complex<double>;
using MultiIndex = std::array<int, 3>;

// Uniform grid on the unit torus. Node j along an axis sits at j/N, which is
// the same point as j/N - 1 on [-0.5, 0.5).
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, int modes);

  int dim() const { return dim_; }
  int modes() const { return modes_; }
  std::size_t size() const { return size_; }
  double spacing() const { return 1.0 / modes_; }

  // Signed wavenumber of FFT index k in [0, N): k for k < N/2, k - N otherwise.
  int wavenumber(int index) const { return index < modes_ / 2 ? index : index - modes_; }
  // Wavenumber used by first derivatives; the Nyquist mode has no odd partner.
  int derivative_wavenumber(int index) const {
    return index == modes_ / 2 ? 0 : wavenumber(index);
  }
  bool is_nyquist(int index) const { return index == modes_ / 2; }

  MultiIndex unflatten(std::size_t flat) const;
  std::size_t flatten(const MultiIndex& index) const;
  // Signed wavenumber vector of a flat mode index.
  MultiIndex wavevector(std::size_t flat) const;
  // Flat index of the mode -alpha.
  std::size_t conjugate_index(std::size_t flat) const;
  // Grid node coordinate along one axis, wrapped into [-0.5, 0.5).
  double coordinate(int index) const;

  bool operator==(const TorusGrid& other) const = default;

 private:
  int dim_ = 0;
  int modes_ = 0;
  std::size_t size_ = 0;
};

// Real-valued field sampled at the grid nodes; component-major storage.
class PhysicalField {
 public:
  PhysicalField() = default;
  PhysicalField(const TorusGrid& grid, int components);

  const TorusGrid& grid() const { return grid_; }
  int components() const { return components_; }
  std::span<double> component(int c);
  std::span<const double> component(int c) const;
  double& at(int c, std::size_t node) { return values_[c * grid_.size() + node]; }
  double at(int c, std::size_t node) const { return values_[c * grid_.size() + node]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  TorusGrid grid_;
  int components_ = 0;
  std::vector<double> values_;
};

// Fourier modes of a real field, v(x) = sum_alpha v_alpha exp(2 pi i alpha.x).
// All N^n modes are stored in FFT order; v_{-alpha} = conj(v_alpha).
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(const TorusGrid& grid, int components);

  const TorusGrid& grid() const { return grid_; }
  int components() const { return components_; }
  std::span<Complex> component(int c);
  std::span<const Complex> component(int c) const;
  Complex& at(int c, std::size_t mode) { return modes_[c * grid_.size() + mode]; }
  const Complex& at(int c, std::size_t mode) const { return modes_[c * grid_.size() + mode]; }
  std::vector<Complex>& data() { return modes_; }
  const std::vector<Complex>& data() const { return modes_; }

  // Replaces each pair (alpha, -alpha) by its Hermitian average.
  void enforce_conjugate_symmetry();
  double max_conjugate_asymmetry() const;
  double max_abs() const;

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double scale);
  // this += scale * other
  void axpy(double scale, const SpectralField& other);

 private:
  TorusGrid grid_;
  int components_ = 0;
  std::vector<Complex> modes_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double scale, SpectralField a);

SpectralField to_modes(const PhysicalField& f);
PhysicalField to_grid(const SpectralField& v);

// Single component of v as a scalar field.
SpectralField component_of(const SpectralField& v, int i);
// Modes 2 pi i alpha_k v_{i alpha}.
SpectralField derivative(const SpectralField& v, int i, int k);
SpectralField divergence(const SpectralField& v);
SpectralField laplacian(const SpectralField& v);
// Gradient of a scalar field as an n-component field.
SpectralField gradient(const SpectralField& scalar);
// Zeroes every mode with some 3|alpha_k| >= N, so products of kept modes never alias back.
SpectralField dealias(const SpectralField& v);
bool is_dealiased_mode(const TorusGrid& grid, std::size_t flat);

// sqrt(sum_i sum_alpha |v_{i alpha}|^2 (1 + |alpha|^2)^s)
double sobolev_norm(const SpectralField& v, double s);
// Grid L2 norm sqrt(h^n sum |f|^2) over all components.
double l2_norm(const PhysicalField& f);
double lp_norm(const PhysicalField& f, double p);
double max_abs(const PhysicalField& f);
// sum_{i,k} |d_k v_i|^2 in L2.
double gradient_norm_squared(const SpectralField& v);
double max_divergence_mode(const SpectralField& v);
// Mode energy sum_i |v_{i alpha}|^2 binned by nearest integer |alpha|.
std::vector<double> shell_spectrum(const SpectralField& v);
// Pointwise grid product of scalar fields followed by the 2/3 rule.
SpectralField dealiased_product(const SpectralField& a, const SpectralField& b);
// Evaluates the trigonometric polynomial of component i at an arbitrary point.
double evaluate_at(const SpectralField& v, int i, std::span<const double> x);

}  // namespace nslb
