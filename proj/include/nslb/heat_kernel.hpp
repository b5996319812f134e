#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nslb/cone_cylinder.hpp"

namespace nslb {

struct KernelSpec {
  double nu_eff = 1.0;
  int dim = 3;

  void validate() const;
};

// (4 pi nu t)^{-n/2} exp(-|y|^2 / (4 nu t))
double gaussian(double t, std::span<const double> y, const KernelSpec& k);
// d/dy_j of gaussian: -y_j / (2 nu t) * G
double gaussian_derivative(double t, std::span<const double> y, int j, const KernelSpec& k);

enum class KernelVariant { kernel, derivative };

// Exponent a in sup_z z^a exp(-z^2): n/2 - delta for the kernel, n/2 + 1 - delta for the derivative.
double bound_exponent(int dim, double delta, KernelVariant variant);
// sup over z in (0, 10] of z^a exp(-z^2), grid search refined by Brent's method.
double bound_constant(int dim, double delta, KernelVariant variant);
// Exact sup over (t, y) of |K| (4 pi nu t)^delta |y|^{n(+1) - 2 delta}.
double sharp_bound_constant(int dim, double delta, KernelVariant variant);

struct ScanGrid {
  double t_min = 1e-4;
  double t_max = 1e2;
  int t_points = 25;
  double r_min = 1e-4;
  double r_max = 1e3;
  int r_points = 281;
};

struct BoundReport {
  KernelVariant variant = KernelVariant::derivative;
  double delta = 0.0;
  double c_observed = 0.0;   // scanned sup of |K| (4 pi nu t)^delta |y|^{...}
  double c_predicted = 0.0;  // bound_constant
  double c_sharp = 0.0;      // sharp_bound_constant
  double t_at_max = 0.0;
  double r_at_max = 0.0;
  bool pass = false;         // c_observed <= c_predicted (1 + 1e-6)
};
BoundReport kernel_bound_check(double delta, const KernelSpec& k, KernelVariant variant, const ScanGrid& scan = {});

// int_{|y| <= radius} |x - y|^{-a} |y|^{-b} dy for n = x.size() in {2, 3}.
double elliptic_integral(double a, double b, std::span<const double> x, double radius);

struct EllipticReport {
  double a = 0.0;
  double b = 0.0;
  int dim = 0;
  double radius = 0.0;
  double at_origin = 0.0;
  std::vector<double> distances;
  std::vector<double> values;
  double expected_exponent = 0.0;  // n - a - b
  double fitted_exponent = 0.0;    // log-log slope of |I(x) - I(0)| (or I(x) if n - a - b <= 0)
  double calibrated_c = 0.0;       // max I / max(|x|^{n-a-b}, 1)
  double far_field_ratio = 0.0;    // I(x) |x|^a / int_B |y|^{-b} at the largest distance
  bool bound_holds = false;
};
EllipticReport elliptic_integral_check(double a, double b, int dim, double radius,
                                       std::span<const double> distances);

// Cell-centred space-time quadrature for the cylinder kernels.
struct SeriesQuadrature {
  int space_points = 24;        // cells per axis on the box [-L, L]^n
  int time_points = 12;         // midpoint cells on [s, tau]
  double box_half_width = 0.0;  // 0 selects the base radius r_0
  bool restrict_to_ball = true;
};

struct SeriesResult {
  std::vector<double> terms;  // G^{mu,k}(tau, z; s, v), k = 1..K
  double sum = 0.0;
  double tail_estimate = 0.0;  // magnitude of the last term
  bool tail_decreasing = true; // last three terms strictly decreasing in magnitude
};
// G^{k+1}(tau, u; s, v) = int_s^tau int_Omega G(tau - sigma, u - w) G^k(sigma, w; s, v) dw dsigma
SeriesResult boundary_kernel_series(int K, const CylinderSpec& cyl, const KernelSpec& k, double tau,
                                    std::span<const double> z, double s, std::span<const double> v,
                                    const SeriesQuadrature& quad = {});

// int G(t1, u - w) G(t2, w - v) dw by the midpoint rule on [-L, L]^n with the
// given cells per axis; radius > 0 restricts the integral to the ball.
double kernel_composition(const KernelSpec& k, double t1, double t2, std::span<const double> u,
                          std::span<const double> v, double half_width, int points, double radius = 0.0);

using SpaceTimeFn = std::function<double(double tau, std::span<const double> z)>;

// Sign in front of the outer 2 (N * G) term of the boundary data.
enum class BoundaryVariant { outer_plus, outer_minus };

struct DuhamelProblem {
  CylinderSpec cylinder;
  KernelSpec kernel;
  SpaceTimeFn field;  // w(tau, z): left-hand side, initial and boundary data
  double coverage_begin = 0.0;
  double coverage_end = 0.0;
  SpaceTimeFn source;  // N(tau, z); empty means no source
  bool include_boundary = true;
  BoundaryVariant variant = BoundaryVariant::outer_plus;
  int series_order = 1;
};

struct DuhamelQuadrature {
  int initial_points = 64;   // midpoint cells per axis for the initial convolution
  int space_points = 24;     // cells per axis for the time-integrated terms
  int time_points = 16;      // midpoint cells on [t_in, tau]
  int boundary_points = 64;  // nodes per angular direction on the sphere
};

struct DuhamelReport {
  double residual = 0.0;  // max over probes of |LHS - RHS|
  double rms = 0.0;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> initial_term;
  std::vector<double> source_term;
  std::vector<double> boundary_term;
};
DuhamelReport duhamel_residual(const DuhamelProblem& problem, double tau,
                               const std::vector<std::vector<double>>& probes,
                               const DuhamelQuadrature& quad = {});

struct SymmetricConvolution {
  double value = 0.0;
  double bound = 0.0;               // l0 int_{y_j >= 0} 2 y_j |G_j| = l0
  double quadrature_majorant = 0.0; // the same majorant summed over the quadrature nodes
};
// int l(x - y) G_j(t, y) dy evaluated over the half space y_j >= 0 with the
// reflected integrand (l(x - y) - l(x - y^{-j})) G_j(t, y).
SymmetricConvolution symmetric_convolution(const std::function<double(std::span<const double>)>& l, double l0,
                                           std::span<const double> x, int j, double t, const KernelSpec& k,
                                           int points = 64, double extent = 10.0);

}  // namespace nslb
