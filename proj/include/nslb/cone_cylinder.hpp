#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "nslb/ns_dynamics.hpp"
#include "nslb/spectral_core.hpp"

namespace nslb {

// Backward cone ending at (t_s, x_s), entered at t_1. Only rho = 1 is supported.
class ConeSpec {
 public:
  ConeSpec(double t_s, std::vector<double> x_s, double t_1, double rho = 1.0);

  double t_s() const { return t_s_; }
  const std::vector<double>& x_s() const { return x_s_; }
  double t_1() const { return t_1_; }
  double rho() const { return 1.0; }
  int dim() const { return static_cast<int>(x_s_.size()); }

 private:
  double t_s_;
  std::vector<double> x_s_;
  double t_1_;
};

struct CylinderSpec {
  int dim = 0;
  double t_in = 0.0;  // t_1 / (t_s - t_1)
  double r_0 = 0.0;   // t_s - t_1, radius of the base ball
};
CylinderSpec cylinder_of(const ConeSpec& cone);

double tau_of_t(double t, const ConeSpec& cone);
double t_of_tau(double tau, const ConeSpec& cone);
double dtau_dt(double t, const ConeSpec& cone);

struct MuCoefficients {
  double mu1 = 0.0;  // (t_s - t)/t_s = 1/(1 + tau)
  double mu2 = 0.0;  // 1/t_s
};
MuCoefficients mu_coeffs(double tau, const ConeSpec& cone);

// (t_s - t)^{-|alpha|} = (1 + tau)^{|alpha|} / t_s^{|alpha|}
double derivative_rescale(int order, double tau, const ConeSpec& cone);
double derivative_rescale(std::span<const int> alpha, double tau, const ConeSpec& cone);

// Original-frame point x = x_s + (t_s - t(tau)) z, not wrapped onto the torus.
std::vector<double> x_of_z(std::span<const double> z, double tau, const ConeSpec& cone);

// Space-time field v(t, x) with a finite covered time interval.
class FieldSource {
 public:
  virtual ~FieldSource() = default;
  virtual int dim() const = 0;
  virtual int components() const = 0;
  virtual std::pair<double, double> time_range() const = 0;
  virtual void evaluate(double t, std::span<const double> x, std::span<double> out) const = 0;
};

// Analytic source from a callable.
class FunctionSource : public FieldSource {
 public:
  using Fn = std::function<void(double, std::span<const double>, std::span<double>)>;
  FunctionSource(int dim, int components, Fn fn, double t_min = 0.0,
                 double t_max = std::numeric_limits<double>::infinity());
  int dim() const override { return dim_; }
  int components() const override { return components_; }
  std::pair<double, double> time_range() const override { return {t_min_, t_max_}; }
  void evaluate(double t, std::span<const double> x, std::span<double> out) const override;

 private:
  int dim_;
  int components_;
  Fn fn_;
  double t_min_;
  double t_max_;
};

// Periodic grid snapshots, multilinear in space and linear in time.
class SnapshotSource : public FieldSource {
 public:
  SnapshotSource(std::vector<double> times, std::vector<PhysicalField> snapshots);
  static SnapshotSource from_trajectory(const Trajectory& traj);
  // Zero-mean pressure of every snapshot, as a scalar source.
  static SnapshotSource pressure_of(const Trajectory& traj);

  int dim() const override { return grid_.dim(); }
  int components() const override { return components_; }
  std::pair<double, double> time_range() const override { return {times_.front(), times_.back()}; }
  void evaluate(double t, std::span<const double> x, std::span<double> out) const override;

 private:
  void interpolate(const PhysicalField& f, std::span<const double> x, std::span<double> out) const;

  TorusGrid grid_;
  int components_ = 0;
  std::vector<double> times_;
  std::vector<PhysicalField> snapshots_;
};

// Node-centred Cartesian grid on [-L, L]^n with a mask for the ball |z| <= r_0.
struct BoxGrid {
  int dim = 2;
  int points = 33;
  double half_width = 1.0;
  double radius = 1.0;

  void validate() const;
  double spacing() const { return 2.0 * half_width / (points - 1); }
  std::size_t size() const;
  MultiIndex unflatten(std::size_t flat) const;
  std::size_t flatten(const MultiIndex& index) const;
  std::vector<double> node(std::size_t flat) const;
  bool in_ball(std::size_t flat) const;
};

// Box grid resolving the cylinder base with the given points per axis and a
// two-cell rim outside the ball for stencils and boundary data.
BoxGrid cylinder_box(const CylinderSpec& cyl, int points);

struct ComparisonField {
  double tau = 0.0;
  BoxGrid grid;
  int components = 0;
  std::vector<double> values;  // component-major over the box

  double& at(int c, std::size_t node) { return values[c * grid.size() + node]; }
  double at(int c, std::size_t node) const { return values[c * grid.size() + node]; }
};

// w_i(tau, z) = v_i(t(tau), x_s + (t_s - t) z) on every box node.
ComparisonField sample_w(const FieldSource& source, const ConeSpec& cone, double tau, const BoxGrid& grid,
                         double margin = 0.5);

// Second-order finite differences on the box; one-sided at the box edges.
std::vector<double> fd_derivative(const ComparisonField& w, int component, int direction);
std::vector<double> fd_laplacian(const ComparisonField& w, int component);
// Divergence of w in z on the box nodes.
std::vector<double> divergence_z(const ComparisonField& w);
// Largest |divergence| over the ball nodes.
double max_divergence_in_ball(const ComparisonField& w);

struct TransformedRhs {
  ComparisonField rhs;       // mu2 nu Delta w - mu1 (w + z).grad w - mu1 grad p^w on ball nodes
  ComparisonField pressure;  // p^w on ball nodes, boundary data elsewhere
};

// Evaluates the transformed momentum right-hand side. The pressure solves
// Delta p^w = -sum w_{i,j} w_{j,i} on the ball nodes with Dirichlet data taken
// from outer_pressure on the surrounding nodes.
TransformedRhs transformed_rhs(const ComparisonField& w, const ComparisonField& outer_pressure,
                               const ConeSpec& cone, double nu);

struct ResidualReport {
  double l2 = 0.0;   // discrete L2 norm over ball nodes (cell volume weighted)
  double max = 0.0;
};
// Residual of d_tau w - transformed_rhs, with d_tau by a centred difference of width 2 dtau.
ResidualReport transformed_residual(const FieldSource& velocity, const FieldSource& pressure,
                                    const ConeSpec& cone, double nu, double tau, const BoxGrid& grid,
                                    double dtau);

}  // namespace nslb
