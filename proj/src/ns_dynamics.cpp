#include "nslb/ns_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "nslb/leray.hpp"

namespace nslb {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Multiplies each mode by exp(-nu (2 pi)^2 |alpha|^2 h).
SpectralField diffuse(const SpectralField& v, double nu, double h) {
  SpectralField out = v;
  const TorusGrid& grid = v.grid();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    MultiIndex k = grid.wavevector(j);
    double k2 = 0.0;
    for (int d = 0; d < grid.dim(); ++d) k2 += double(k[d]) * k[d];
    double factor = std::exp(-nu * kTwoPi * kTwoPi * k2 * h);
    for (int c = 0; c < v.components(); ++c) out.at(c, j) *= factor;
  }
  return out;
}

double trapezoid_increment(double t0, double t1, double f0, double f1) { return 0.5 * (t1 - t0) * (f0 + f1); }

}  // namespace

void SolverConfig::validate() const {
  if (!(nu > 0.0)) throw std::invalid_argument("solver: nu must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("solver: dt must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("solver: t_end must be non-negative");
  if (save_every < 1) throw std::invalid_argument("solver: save_every must be at least 1");
}

double SolverConfig::stability_ratio(const TorusGrid& grid) const {
  double kmax = kTwoPi * grid.modes() / 2.0;
  return dt * nu * kmax * kmax;
}

SpectralField taylor_green(const TorusGrid& grid, double amplitude) {
  SpectralField v(grid, grid.dim());
  // cos(2 pi x1) sin(2 pi x2) = sum over signs of e^{2 pi i (s1 x1 + s2 x2)} * s2 / (4i)
  for (int s1 : {-1, 1}) {
    for (int s2 : {-1, 1}) {
      std::size_t j = grid.flatten({s1, s2, 0});
      v.at(0, j) += amplitude * Complex(0.0, -0.25 * s2);
      v.at(1, j) += -amplitude * Complex(0.0, -0.25 * s1);
    }
  }
  return v;
}

double kinetic_energy(const SpectralField& v) {
  double norm = sobolev_norm(v, 0.0);
  return 0.5 * norm * norm;
}

SpectralField nonlinear_term(const SpectralField& v, bool dealias_products) {
  const TorusGrid& grid = v.grid();
  const int n = grid.dim();
  SpectralField base = dealias_products ? dealias(v) : v;
  PhysicalField u = to_grid(base);
  PhysicalField advection(grid, n);
  for (int k = 0; k < n; ++k) {
    auto uk = u.component(k);
    for (int i = 0; i < n; ++i) {
      PhysicalField d = to_grid(derivative(base, i, k));
      auto di = d.component(0);
      auto out = advection.component(i);
      for (std::size_t j = 0; j < grid.size(); ++j) out[j] += uk[j] * di[j];
    }
  }
  SpectralField modes = to_modes(advection);
  if (dealias_products) modes = dealias(modes);
  SpectralField projected = leray_project(modes);
  projected *= -1.0;
  return projected;
}

SpectralField rhs(const SpectralField& v, const SolverConfig& cfg) {
  SpectralField out = laplacian(v);
  out *= cfg.nu;
  out += nonlinear_term(v, cfg.dealias);
  return out;
}

SpectralField step(const SpectralField& v, const SolverConfig& cfg, double h) {
  const double nu = cfg.nu;
  SpectralField a = nonlinear_term(v, cfg.dealias);

  SpectralField stage = v;
  stage.axpy(0.5 * h, a);
  SpectralField b = nonlinear_term(diffuse(stage, nu, 0.5 * h), cfg.dealias);

  SpectralField vh = diffuse(v, nu, 0.5 * h);
  stage = vh;
  stage.axpy(0.5 * h, b);
  SpectralField c = nonlinear_term(stage, cfg.dealias);

  stage = diffuse(v, nu, h);
  stage.axpy(h, diffuse(c, nu, 0.5 * h));
  SpectralField d = nonlinear_term(stage, cfg.dealias);

  SpectralField bc = b;
  bc += c;
  SpectralField out = diffuse(v, nu, h);
  out.axpy(h / 6.0, diffuse(a, nu, h));
  out.axpy(h / 3.0, diffuse(bc, nu, 0.5 * h));
  out.axpy(h / 6.0, d);
  out.enforce_conjugate_symmetry();
  return out;
}

Trajectory simulate(const SpectralField& v0, const SolverConfig& cfg) {
  cfg.validate();
  if (v0.components() != v0.grid().dim()) throw std::invalid_argument("simulate: velocity needs n components");
  Trajectory traj;
  double dissipated = 0.0;
  double dissipation = gradient_norm_squared(v0);
  double pair_start = 0.0, pair_first = 0.0;
  auto record = [&](double t, const SpectralField& v) {
    traj.times.push_back(t);
    traj.snapshots.push_back(v);
    traj.energies.push_back(kinetic_energy(v));
    traj.dissipations.push_back(dissipation);
    traj.dissipated.push_back(dissipated);
  };

  SpectralField v = v0;
  record(0.0, v);
  const long steps = std::lround(cfg.t_end / cfg.dt);
  double energy = kinetic_energy(v);
  for (long s = 1; s <= steps; ++s) {
    v = step(v, cfg, cfg.dt);
    const double t = s * cfg.dt;
    double grid_max = max_abs(to_grid(v));
    if (!std::isfinite(grid_max) || grid_max > cfg.blowup_threshold) {
      traj.terminated_early = true;
      std::ostringstream msg;
      msg << "grid maximum " << grid_max << " exceeded threshold " << cfg.blowup_threshold << " at t=" << t;
      traj.diagnostic = msg.str();
      break;
    }
    double next = kinetic_energy(v);
    if (energy > 0.0) traj.max_energy_increase = std::max(traj.max_energy_increase, (next - energy) / energy);
    energy = next;
    // Composite Simpson over step pairs; a trailing odd step uses the trapezoid.
    double next_dissipation = gradient_norm_squared(v);
    if (s % 2 == 1) {
      pair_start = dissipated;
      pair_first = dissipation;
      dissipated += 0.5 * cfg.dt * (dissipation + next_dissipation);
    } else {
      dissipated = pair_start + cfg.dt / 3.0 * (pair_first + 4.0 * dissipation + next_dissipation);
    }
    dissipation = next_dissipation;
    if (s % cfg.save_every == 0 || s == steps) record(t, v);
  }
  return traj;
}

HopfReport hopf_energy_check(const Trajectory& traj, const SolverConfig& cfg) {
  if (traj.times.empty()) throw std::invalid_argument("hopf_energy_check: empty trajectory");
  HopfReport report;
  report.initial_energy = traj.energies.front();
  const bool per_step = traj.dissipated.size() == traj.times.size();
  double dissipated = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (per_step)
      dissipated = traj.dissipated[k];
    else if (k > 0)
      dissipated += trapezoid_increment(traj.times[k - 1], traj.times[k], traj.dissipations[k - 1],
                                        traj.dissipations[k]);
    double balance = traj.energies[k] + cfg.nu * dissipated;
    report.balance.push_back(balance);
    report.max_violation = std::max(report.max_violation, balance - report.initial_energy);
    if (report.initial_energy > 0.0)
      report.max_relative_gap =
          std::max(report.max_relative_gap, std::abs(balance - report.initial_energy) / report.initial_energy);
  }
  return report;
}

WeakStrongReport weak_strong_bound(const Trajectory& a, const Trajectory& b) {
  if (a.snapshots.empty() || b.snapshots.empty()) throw std::invalid_argument("weak_strong_bound: empty trajectory");
  if (!(a.snapshots.front().grid() == b.snapshots.front().grid()))
    throw std::invalid_argument("weak_strong_bound: trajectories live on different grids");
  if (a.times.size() != b.times.size()) throw std::invalid_argument("weak_strong_bound: time grids differ");
  for (std::size_t k = 0; k < a.times.size(); ++k)
    if (std::abs(a.times[k] - b.times[k]) > 1e-12 * (1.0 + std::abs(a.times[k])))
      throw std::invalid_argument("weak_strong_bound: time grids differ");

  WeakStrongReport report;
  const TorusGrid& grid = a.snapshots.front().grid();
  report.exponent = grid.dim() == 2 ? 4 : 8;
  report.times = a.times;
  double integral = 0.0;
  double prev_rate = 0.0;
  bool identical = true;
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    double gap = sobolev_norm(a.snapshots[k] - b.snapshots[k], 0.0);
    report.lhs.push_back(gap * gap);
    if (gap != 0.0) identical = false;
    double l4 = lp_norm(to_grid(b.snapshots[k]), 4.0);
    double rate = std::pow(l4, report.exponent) + l4 * l4;
    if (k > 0) integral += trapezoid_increment(a.times[k - 1], a.times[k], prev_rate, rate);
    prev_rate = rate;
    report.integral.push_back(integral);
  }
  report.identical = identical;

  const double lhs0 = report.lhs.front();
  std::optional<double> c_min;
  for (std::size_t k = 1; k < report.lhs.size(); ++k) {
    if (report.lhs[k] == 0.0) continue;
    if (lhs0 == 0.0 || report.integral[k] <= 0.0) {
      c_min = std::numeric_limits<double>::infinity();
      break;
    }
    double needed = std::log(report.lhs[k] / lhs0) / report.integral[k];
    c_min = c_min ? std::max(*c_min, needed) : needed;
  }
  report.minimal_constant = c_min;
  return report;
}

}  // namespace nslb
