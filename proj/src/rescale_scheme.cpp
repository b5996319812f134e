#include "nslb/rescale_scheme.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nslb {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SpectralField heat_evolve(const SpectralField& v, double nu, double h) {
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

// All multi-indices of length dim with total order exactly `order`.
void multi_indices(int dim, int order, std::vector<MultiIndex>& out) {
  if (dim == 2) {
    for (int a = 0; a <= order; ++a) out.push_back({a, order - a, 0});
    return;
  }
  for (int a = 0; a <= order; ++a)
    for (int b = 0; a + b <= order; ++b) out.push_back({a, b, order - a - b});
}

}  // namespace

void RescaleParams::validate() const {
  if (!(r > 0.0)) throw std::invalid_argument("rescale: r must be positive");
  if (m < 2) throw std::invalid_argument("rescale: m must be at least 2");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("rescale: delta must lie in (0, 1)");
  if (!(eps0 >= 0.0 && eps0 < 0.5)) throw std::invalid_argument("rescale: eps0 must lie in [0, 0.5)");
  if (!(T >= t0 + kWindowLength)) throw std::invalid_argument("rescale: horizon T must cover the window [t0, t0 + 0.5]");
  if (!(C_m >= 0.0)) throw std::invalid_argument("rescale: C_m must be non-negative");
  if (!(c_nm > 0.0)) throw std::invalid_argument("rescale: c(n, m) must be positive");
}

double s_of_t(double t, const RescaleParams& p) {
  double u = t - p.t0;
  if (u < 0.0) throw std::domain_error("s_of_t: t precedes t0");
  if (u >= 1.0) throw std::domain_error("s_of_t: t - t0 >= 1 makes the map singular");
  return u / std::sqrt(1.0 - u * u);
}

double t_of_s(double s, const RescaleParams& p) {
  if (s < 0.0) throw std::domain_error("t_of_s: s must be non-negative");
  return p.t0 + s / std::sqrt(1.0 + s * s);
}

CoeffAudit mu_of_s(double s, const RescaleParams& p) {
  CoeffAudit audit;
  audit.s = s;
  audit.t = t_of_s(s, p);
  double u = audit.t - p.t0;
  audit.mu = std::pow(1.0 - u * u, 1.5) / (1.0 + audit.t);
  for (int k = 1; k <= 2; ++k) {
    double value = std::pow(1.0 + audit.t, k) * audit.mu;
    audit.mu_tau_k.push_back(value);
    audit.scaled_mu_tau_k.push_back(p.r * value);
  }
  audit.lower_bound = 3.0 * std::sqrt(3.0) / (8.0 * (1.0 + p.T));
  audit.upper_bound = p.r * (1.0 + p.T);
  audit.lower_ok = audit.mu >= audit.lower_bound * (1.0 - 1e-12);
  audit.upper_ok = std::all_of(audit.scaled_mu_tau_k.begin(), audit.scaled_mu_tau_k.end(),
                               [&](double v) { return v <= audit.upper_bound * (1.0 + 1e-12); });
  return audit;
}

double r_policy(const RescaleParams& p) {
  double growth = p.C_m + 1.0;
  return 1.0 / (p.c_nm * growth * growth * (1.0 + p.T));
}

double growth_exponent(double delta, double eps0) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("growth_exponent: delta must lie in (0, 1)");
  if (!(eps0 >= 0.0 && eps0 < 0.5)) throw std::invalid_argument("growth_exponent: eps0 must lie in [0, 0.5)");
  return 2.0 * (1.0 - eps0) * delta + 1.0 - delta;
}

std::vector<double> comparison_value(const VectorFieldFn& v, const RescaleParams& p, double s,
                                     std::span<const double> y) {
  double t = t_of_s(s, p);
  std::vector<double> x(y.begin(), y.end());
  for (double& c : x) c /= p.r;
  std::vector<double> out = v(t, x);
  for (double& c : out) c /= 1.0 + t;
  return out;
}

double regularity_proxy(const SpectralField& v, int m) {
  const TorusGrid& grid = v.grid();
  double total = sobolev_norm(v, m);
  for (int order = 0; order <= m; ++order) {
    std::vector<MultiIndex> betas;
    multi_indices(grid.dim(), order, betas);
    for (const MultiIndex& beta : betas) {
      for (int i = 0; i < v.components(); ++i) {
        SpectralField d = component_of(v, i);
        for (int axis = 0; axis < grid.dim(); ++axis)
          for (int q = 0; q < beta[axis]; ++q) d = derivative(d, 0, axis);
        total += max_abs(to_grid(d));
      }
    }
  }
  return total;
}

IncrementReport increment_bound_check(const SpectralField& v0, const SolverConfig& base, const RescaleParams& p,
                                      const std::vector<double>& ladder, double margin) {
  p.validate();
  if (ladder.size() < 2) throw std::invalid_argument("increment_bound_check: ladder needs at least two steps");
  IncrementReport report;
  report.predicted_exponent = growth_exponent(p.delta, p.eps0);
  report.reference_norm = regularity_proxy(v0, p.m);
  for (double step : ladder) {
    SolverConfig cfg = base;
    cfg.t_end = step;
    cfg.dt = std::min(base.dt, step / 10.0);
    cfg.save_every = std::max(1, static_cast<int>(std::lround(step / cfg.dt)));
    Trajectory traj = simulate(v0, cfg);
    if (traj.terminated_early) throw std::runtime_error("increment_bound_check: unstable run: " + traj.diagnostic);
    SpectralField gap = traj.snapshots.back() - heat_evolve(v0, cfg.nu, step);
    report.steps.push_back(step);
    report.increments.push_back(regularity_proxy(gap, p.m));
  }
  const double floor = 1e-12 * std::max(report.reference_norm, 1e-300);
  report.increments_vanish =
      std::all_of(report.increments.begin(), report.increments.end(), [&](double x) { return x <= floor; });
  if (!report.increments_vanish) {
    double mx = 0.0, my = 0.0;
    std::size_t count = report.steps.size();
    for (std::size_t i = 0; i < count; ++i) {
      mx += std::log(report.steps[i]);
      my += std::log(std::max(report.increments[i], 1e-300));
    }
    mx /= count;
    my /= count;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      double dx = std::log(report.steps[i]) - mx;
      sxy += dx * (std::log(std::max(report.increments[i], 1e-300)) - my);
      sxx += dx * dx;
    }
    report.slope = sxy / sxx;
    report.slope_ok = report.slope >= 1.0 + margin;
  }
  return report;
}

}  // namespace nslb
