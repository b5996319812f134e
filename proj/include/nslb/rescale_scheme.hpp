#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nslb/ns_dynamics.hpp"

namespace nslb {

struct RescaleParams {
  double r = 1.0;      // spatial scale
  double t0 = 0.0;     // window start
  double T = 1.0;      // horizon, T >= t0 + 0.5
  int m = 2;           // regularity order
  double C_m = 1.0;    // data norm bound
  double delta = 0.5;  // kernel exponent in (0, 1)
  double eps0 = 0.0;   // margin in [0, 0.5)
  double c_nm = 32.0;  // calibrated constant of the r policy

  void validate() const;
};

inline constexpr double kWindowLength = 0.5;

// s = u / sqrt(1 - u^2) with u = t - t0.
double s_of_t(double t, const RescaleParams& p);
// t = t0 + s / sqrt(1 + s^2)
double t_of_s(double s, const RescaleParams& p);

struct CoeffAudit {
  double s = 0.0;
  double t = 0.0;
  double mu = 0.0;                  // (1 - u^2)^{3/2} / (1 + t)
  std::vector<double> mu_tau_k;     // (1 + t)^k mu, k = 1, 2
  std::vector<double> scaled_mu_tau_k;  // r (1 + t)^k mu
  double lower_bound = 0.0;         // 3 sqrt(3) / (8 (1 + T))
  double upper_bound = 0.0;         // r (1 + T)
  bool lower_ok = false;
  bool upper_ok = false;
};
CoeffAudit mu_of_s(double s, const RescaleParams& p);

// 1 / (c (C_m + 1)^2 (1 + T))
double r_policy(const RescaleParams& p);
// 2 (1 - eps0) delta + 1 - delta
double growth_exponent(double delta, double eps0);

// u^{r,t0}(s, y) = v(t(s), y / r) / (1 + t(s)) for an analytic v.
using VectorFieldFn = std::function<std::vector<double>(double t, std::span<const double> x)>;
std::vector<double> comparison_value(const VectorFieldFn& v, const RescaleParams& p, double s,
                                     std::span<const double> y);

// sobolev_norm(v, m) plus the grid maxima of all derivatives of order 0..m.
double regularity_proxy(const SpectralField& v, int m);

struct IncrementReport {
  std::vector<double> steps;       // Delta_0 ladder
  std::vector<double> increments;  // proxy norm of v(t0 + D) - heat(v(t0), D)
  double slope = 0.0;              // log-log slope of increments vs Delta_0
  double predicted_exponent = 0.0; // growth_exponent(delta, eps0)
  double reference_norm = 0.0;     // proxy norm of v(t0)
  bool increments_vanish = false;  // all increments below 1e-12 of the reference
  bool slope_ok = false;           // slope >= 1 + margin
};
IncrementReport increment_bound_check(const SpectralField& v0, const SolverConfig& base, const RescaleParams& p,
                                      const std::vector<double>& ladder = {0.02, 0.01, 0.005},
                                      double margin = 0.2);

}  // namespace nslb
