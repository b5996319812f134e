#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nslb/spectral_core.hpp"

namespace nslb {

struct SolverConfig {
  double nu = 0.1;
  double dt = 1e-3;
  double t_end = 0.5;
  int save_every = 1;
  bool dealias = true;
  double blowup_threshold = 1e12;

  void validate() const;
  // dt * nu * (2 pi N/2)^2
  double stability_ratio(const TorusGrid& grid) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SpectralField> snapshots;
  // 1/2 ||v||^2 and ||grad v||^2 at each saved time.
  std::vector<double> energies;
  std::vector<double> dissipations;
  // int_0^t ||grad v||^2 at each saved time, composite Simpson over the solver steps.
  std::vector<double> dissipated;
  // Largest relative per-step energy increase seen during the run.
  double max_energy_increase = 0.0;
  bool terminated_early = false;
  std::string diagnostic;
};

// Divergence-free Taylor-Green vortex A(cos 2 pi x1 sin 2 pi x2, -sin 2 pi x1 cos 2 pi x2)
// in the first two components (third component zero when n = 3).
SpectralField taylor_green(const TorusGrid& grid, double amplitude);
double kinetic_energy(const SpectralField& v);

// -P[(v.grad)v] with dealiased products.
SpectralField nonlinear_term(const SpectralField& v, bool dealias_products = true);
// nu Delta v - P[(v.grad)v]
SpectralField rhs(const SpectralField& v, const SolverConfig& cfg);

// Integrating-factor RK4 in time; diffusion is integrated exactly.
Trajectory simulate(const SpectralField& v0, const SolverConfig& cfg);
SpectralField step(const SpectralField& v, const SolverConfig& cfg, double h);

struct HopfReport {
  std::vector<double> balance;  // 1/2||v(t)||^2 + nu int ||grad v||^2
  double initial_energy = 0.0;
  double max_violation = 0.0;   // max over t of balance - initial, clipped below at 0
  double max_relative_gap = 0.0;  // max |balance - initial| / initial
};
// Uses the per-step dissipation integral when present, else a trapezoid over saved times.
HopfReport hopf_energy_check(const Trajectory& traj, const SolverConfig& cfg);

struct WeakStrongReport {
  int exponent = 0;  // p in ||v||_{L4}^p
  std::vector<double> times;
  std::vector<double> lhs;       // ||a - b||^2(t)
  std::vector<double> integral;  // int_0^t (||b||_{L4}^p + ||b||_{L4}^2) ds
  std::optional<double> minimal_constant;  // smallest C with lhs <= lhs0 exp(C I); nullopt when unconstrained
  bool identical = false;
};
WeakStrongReport weak_strong_bound(const Trajectory& a, const Trajectory& b);

}  // namespace nslb
