#include "nslb/heat_kernel.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "nslb/parallel.hpp"

namespace nslb {
namespace {

constexpr double kPi = std::numbers::pi;

double squared_norm(std::span<const double> y) {
  double s = 0.0;
  for (double c : y) s += c * c;
  return s;
}

void require_point(std::span<const double> y, const KernelSpec& k) {
  if (static_cast<int>(y.size()) != k.dim) throw std::invalid_argument("kernel point dimension mismatch");
}

double sphere_area(int dim) { return dim == 2 ? 2.0 * kPi : 4.0 * kPi; }

// Cells of width h on [-L, L]^n, optionally masked to the ball of the given radius.
class CellGrid {
 public:
  CellGrid(int dim, int points, double half_width, double radius)
      : dim_(dim), points_(points), half_width_(half_width), radius_(radius) {
    if (points < 2) throw std::invalid_argument("cell grid needs at least 2 cells per axis");
    h_ = 2.0 * half_width / points;
    size_ = 1;
    for (int d = 0; d < dim; ++d) size_ *= static_cast<std::size_t>(points);
    mask_.resize(size_);
    centers_.resize(size_ * dim);
    for (std::size_t j = 0; j < size_; ++j) {
      std::size_t rest = j;
      double r2 = 0.0;
      for (int d = dim - 1; d >= 0; --d) {
        int k = static_cast<int>(rest % points);
        rest /= points;
        double c = -half_width + (k + 0.5) * h_;
        centers_[j * dim + d] = c;
        r2 += c * c;
      }
      mask_[j] = radius <= 0.0 || r2 <= radius * radius;
    }
  }

  int dim() const { return dim_; }
  int points() const { return points_; }
  double spacing() const { return h_; }
  double volume() const { return std::pow(h_, dim_); }
  std::size_t size() const { return size_; }
  bool inside(std::size_t j) const { return mask_[j]; }
  std::span<const double> center(std::size_t j) const { return {centers_.data() + j * dim_, std::size_t(dim_)}; }

  std::vector<double> masked(std::vector<double> f) const {
    for (std::size_t j = 0; j < size_; ++j)
      if (!mask_[j]) f[j] = 0.0;
    return f;
  }

  // Integrals of the 1-D heat kernel at time dt over each cell along one axis, seen from x.
  std::vector<double> axis_weights(double dt, double nu, double x) const {
    std::vector<double> w(points_);
    double s = std::sqrt(4.0 * nu * dt);
    for (int k = 0; k < points_; ++k) {
      double a = -half_width_ + k * h_;
      w[k] = 0.5 * (std::erf((x - a) / s) - std::erf((x - a - h_) / s));
    }
    return w;
  }

  // out(k) = sum_k' prod_d E(k_d - k'_d) f(k'), E the cell-integrated 1-D kernel.
  std::vector<double> convolve(const std::vector<double>& f, double dt, double nu) const {
    double s = std::sqrt(4.0 * nu * dt);
    std::vector<double> offsets(2 * points_ - 1);
    for (int o = -(points_ - 1); o <= points_ - 1; ++o)
      offsets[o + points_ - 1] = 0.5 * (std::erf((o * h_ + 0.5 * h_) / s) - std::erf((o * h_ - 0.5 * h_) / s));
    std::vector<double> cur = f;
    std::vector<double> next(size_);
    std::vector<double> line(points_);
    for (int d = 0; d < dim_; ++d) {
      std::size_t stride = 1;
      for (int e = dim_ - 1; e > d; --e) stride *= points_;
      for (std::size_t j = 0; j < size_; ++j) {
        std::size_t k = (j / stride) % points_;
        if (k != 0) continue;
        for (int m = 0; m < points_; ++m) line[m] = cur[j + m * stride];
        for (int m = 0; m < points_; ++m) {
          double sum = 0.0;
          for (int q = 0; q < points_; ++q) sum += offsets[m - q + points_ - 1] * line[q];
          next[j + m * stride] = sum;
        }
      }
      std::swap(cur, next);
    }
    return cur;
  }

  // sum_k prod_d (cell integral of the 1-D kernel seen from x_d) f(k)
  double contract(const std::vector<double>& f, double dt, double nu, std::span<const double> x) const {
    std::vector<std::vector<double>> w(dim_);
    for (int d = 0; d < dim_; ++d) w[d] = axis_weights(dt, nu, x[d]);
    double sum = 0.0;
    for (std::size_t j = 0; j < size_; ++j) {
      if (f[j] == 0.0) continue;
      std::size_t rest = j;
      double weight = 1.0;
      for (int d = dim_ - 1; d >= 0; --d) {
        weight *= w[d][rest % points_];
        rest /= points_;
      }
      sum += weight * f[j];
    }
    return sum;
  }

 private:
  int dim_;
  int points_;
  double half_width_;
  double radius_;
  double h_;
  std::size_t size_;
  std::vector<bool> mask_;
  std::vector<double> centers_;
};

using SpaceTimeCells = std::vector<std::vector<double>>;

// Midpoint-in-time heat potential on the cells: (T f)(sigma, w) =
// int_{t0}^{sigma} int_Omega G(sigma - sigma', w - w') f(sigma', w') dw' dsigma'.
class HeatPotential {
 public:
  HeatPotential(const CellGrid& cells, double nu, double t0, double t1, int time_points)
      : cells_(cells), nu_(nu), t0_(t0), step_((t1 - t0) / time_points), time_points_(time_points) {}

  double time(int m) const { return t0_ + (m + 0.5) * step_; }
  int time_points() const { return time_points_; }
  double step() const { return step_; }

  SpaceTimeCells apply(const SpaceTimeCells& f) const {
    SpaceTimeCells masked(time_points_);
    for (int m = 0; m < time_points_; ++m) masked[m] = cells_.masked(f[m]);
    SpaceTimeCells out(time_points_, std::vector<double>(cells_.size(), 0.0));
    parallel_for(time_points_, [&](std::size_t mi) {
      int m = static_cast<int>(mi);
      std::vector<double>& target = out[m];
      for (int q = 0; q < m; ++q) {
        std::vector<double> c = cells_.convolve(masked[q], (m - q) * step_, nu_);
        for (std::size_t j = 0; j < c.size(); ++j) target[j] += step_ * c[j];
      }
      std::vector<double> c = cells_.convolve(masked[m], 0.25 * step_, nu_);
      for (std::size_t j = 0; j < c.size(); ++j) target[j] += 0.5 * step_ * c[j];
    });
    return out;
  }

  // (T f) at time index m (m == time_points means the end time t1) and point x.
  double apply_at(const SpaceTimeCells& f, int m, std::span<const double> x) const {
    double target = m == time_points_ ? t0_ + time_points_ * step_ : time(m);
    double sum = 0.0;
    for (int q = 0; q < std::min(m, time_points_); ++q)
      sum += step_ * cells_.contract(cells_.masked(f[q]), target - time(q), nu_, x);
    if (m < time_points_) sum += 0.5 * step_ * cells_.contract(cells_.masked(f[m]), 0.25 * step_, nu_, x);
    return sum;
  }

 private:
  const CellGrid& cells_;
  double nu_;
  double t0_;
  double step_;
  int time_points_;
};

// Quadrature nodes and surface weights on the sphere |y| = r.
struct SurfaceNodes {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
};

SurfaceNodes sphere_nodes(int dim, double r, int points) {
  SurfaceNodes nodes;
  if (dim == 2) {
    double dtheta = 2.0 * kPi / points;
    for (int i = 0; i < points; ++i) {
      double th = (i + 0.5) * dtheta;
      nodes.points.push_back({r * std::cos(th), r * std::sin(th)});
      nodes.weights.push_back(r * dtheta);
    }
    return nodes;
  }
  int polar = std::max(2, points / 2);
  double dth = kPi / polar;
  double dph = 2.0 * kPi / points;
  for (int i = 0; i < polar; ++i) {
    double th = (i + 0.5) * dth;
    for (int j = 0; j < points; ++j) {
      double ph = (j + 0.5) * dph;
      nodes.points.push_back({r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th)});
      nodes.weights.push_back(r * r * std::sin(th) * dth * dph);
    }
  }
  return nodes;
}

}  // namespace

void KernelSpec::validate() const {
  if (!(nu_eff > 0.0)) throw std::invalid_argument("kernel: nu_eff must be positive");
  if (dim != 2 && dim != 3) throw std::invalid_argument("kernel: dimension must be 2 or 3");
}

double gaussian(double t, std::span<const double> y, const KernelSpec& k) {
  if (!(t > 0.0)) throw std::domain_error("gaussian: t must be positive");
  require_point(y, k);
  double four_nu_t = 4.0 * k.nu_eff * t;
  return std::pow(kPi * four_nu_t, -0.5 * k.dim) * std::exp(-squared_norm(y) / four_nu_t);
}

double gaussian_derivative(double t, std::span<const double> y, int j, const KernelSpec& k) {
  if (j < 0 || j >= k.dim) throw std::out_of_range("gaussian_derivative: direction out of range");
  return -y[j] / (2.0 * k.nu_eff * t) * gaussian(t, y, k);
}

double bound_exponent(int dim, double delta, KernelVariant variant) {
  return 0.5 * dim + (variant == KernelVariant::derivative ? 1.0 : 0.0) - delta;
}

double bound_constant(int dim, double delta, KernelVariant variant) {
  const double a = bound_exponent(dim, delta, variant);
  auto f = [a](double z) { return std::pow(z, a) * std::exp(-z * z); };
  const double step = 1e-4;
  double best_z = step;
  double best = f(step);
  for (int i = 2; i <= 100000; ++i) {
    double z = i * step;
    double v = f(z);
    if (v > best) {
      best = v;
      best_z = z;
    }
  }
  auto refined = boost::math::tools::brent_find_minima([&](double z) { return -f(z); },
                                                       std::max(step, best_z - step), best_z + step, 52);
  return std::max(best, -refined.second);
}

double sharp_bound_constant(int dim, double delta, KernelVariant variant) {
  // |G_j| (4 pi nu t)^delta |y|^{n+1-2 delta} = 2 pi^{delta - n/2} q^{2a} e^{-q^2}, q = |y| / sqrt(4 nu t)
  if (variant == KernelVariant::derivative) {
    double a = 0.5 * dim + 1.0 - delta;
    return 2.0 * std::pow(kPi, delta - 0.5 * dim) * std::pow(a, a) * std::exp(-a);
  }
  double b = 0.5 * dim - delta;
  return std::pow(kPi, delta - 0.5 * dim) * std::pow(b, b) * std::exp(-b);
}

BoundReport kernel_bound_check(double delta, const KernelSpec& k, KernelVariant variant, const ScanGrid& scan) {
  k.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("kernel_bound_check: delta must lie in (0, 1)");
  BoundReport report;
  report.variant = variant;
  report.delta = delta;
  report.c_predicted = bound_constant(k.dim, delta, variant);
  report.c_sharp = sharp_bound_constant(k.dim, delta, variant);

  const double power = k.dim + (variant == KernelVariant::derivative ? 1.0 : 0.0) - 2.0 * delta;
  std::vector<std::vector<double>> directions;
  std::vector<double> axis(k.dim, 0.0);
  axis[0] = 1.0;
  directions.push_back(axis);
  std::vector<double> diagonal(k.dim, 1.0 / std::sqrt(double(k.dim)));
  directions.push_back(diagonal);

  auto log_node = [](double lo, double hi, int count, int i) {
    return count == 1 ? lo : lo * std::pow(hi / lo, double(i) / (count - 1));
  };
  struct RowMax {
    double value = 0.0, t = 0.0, r = 0.0;
  };
  std::vector<RowMax> rows(scan.t_points);
  parallel_for(scan.t_points, [&](std::size_t i) {
    double t = log_node(scan.t_min, scan.t_max, scan.t_points, static_cast<int>(i));
    double time_factor = std::pow(4.0 * kPi * k.nu_eff * t, delta);
    RowMax best;
    std::vector<double> y(k.dim);
    for (int q = 0; q < scan.r_points; ++q) {
      double r = log_node(scan.r_min, scan.r_max, scan.r_points, q);
      for (const auto& dir : directions) {
        for (int d = 0; d < k.dim; ++d) y[d] = r * dir[d];
        double kernel = variant == KernelVariant::derivative ? gaussian_derivative(t, y, 0, k) : gaussian(t, y, k);
        double value = std::abs(kernel) * time_factor * std::pow(r, power);
        if (value > best.value) best = {value, t, r};
      }
    }
    rows[i] = best;
  });
  for (const auto& row : rows) {
    if (row.value > report.c_observed) {
      report.c_observed = row.value;
      report.t_at_max = row.t;
      report.r_at_max = row.r;
    }
  }
  report.pass = report.c_observed <= report.c_predicted * (1.0 + 1e-6);
  return report;
}

double elliptic_integral(double a, double b, std::span<const double> x, double radius) {
  const int n = static_cast<int>(x.size());
  if (n != 2 && n != 3) throw std::invalid_argument("elliptic_integral: dimension must be 2 or 3");
  if (a >= n || b >= n) throw std::domain_error("elliptic_integral: need a < n and b < n for integrability");
  if (!(radius > 0.0)) throw std::invalid_argument("elliptic_integral: radius must be positive");
  const double d = std::sqrt(squared_norm(x));
  if (d == 0.0) {
    double p = n - a - b;
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    return sphere_area(n) * std::pow(radius, p) / p;
  }

  boost::math::quadrature::tanh_sinh<double> integrator;
  const double tol = 1e-10;
  std::function<double(double)> radial;
  if (n == 3) {
    // Angular average of |x - r w|^{-a} over the unit sphere, in closed form.
    radial = [a, b, d](double r) {
      if (r <= 0.0) return 0.0;
      double gap = std::abs(r - d);
      double angular;
      if (std::abs(a - 2.0) < 1e-12)
        angular = 2.0 * kPi * std::log((r + d) / gap) / (r * d);
      else
        angular = 2.0 * kPi * (std::pow(r + d, 2.0 - a) - std::pow(gap, 2.0 - a)) / (r * d * (2.0 - a));
      return std::pow(r, 2.0 - b) * angular;
    };
  } else {
    radial = [a, b, d, &integrator, tol](double r) {
      if (r <= 0.0) return 0.0;
      auto inner = [a, r, d](double th) {
        double dist2 = r * r + d * d - 2.0 * r * d * std::cos(th);
        return std::pow(std::max(dist2, 0.0), -0.5 * a);
      };
      double angular = 2.0 * integrator.integrate(inner, 0.0, kPi, tol);
      return std::pow(r, 1.0 - b) * angular;
    };
  }
  double upper = std::min(d, radius);
  double value = integrator.integrate(radial, 0.0, upper, tol);
  if (d < radius) value += integrator.integrate(radial, d, radius, tol);
  return value;
}

EllipticReport elliptic_integral_check(double a, double b, int dim, double radius,
                                       std::span<const double> distances) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("elliptic_integral_check: dimension must be 2 or 3");
  if (a >= dim || b >= dim) throw std::domain_error("elliptic_integral_check: need a < n and b < n");
  EllipticReport report;
  report.a = a;
  report.b = b;
  report.dim = dim;
  report.radius = radius;
  report.expected_exponent = dim - a - b;
  std::vector<double> origin(dim, 0.0);
  report.at_origin = elliptic_integral(a, b, origin, radius);
  auto integral_at = [&](double dist) {
    std::vector<double> x(dim, 0.0);
    x[0] = dist;
    return elliptic_integral(a, b, x, radius);
  };
  for (double dist : distances) {
    report.distances.push_back(dist);
    report.values.push_back(integral_at(dist));
  }

  // Least-squares slope in log-log coordinates over the points inside the ball.
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < report.distances.size(); ++i) {
    if (report.distances[i] >= radius) continue;
    double y = report.expected_exponent > 0.0 ? std::abs(report.values[i] - report.at_origin) : report.values[i];
    if (y <= 0.0) continue;
    lx.push_back(std::log(report.distances[i]));
    ly.push_back(std::log(y));
  }
  if (lx.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    report.fitted_exponent = sxy / sxx;
  }

  auto envelope = [&](double dist) { return std::max(std::pow(dist, report.expected_exponent), 1.0); };
  for (std::size_t i = 0; i < report.distances.size(); ++i)
    report.calibrated_c = std::max(report.calibrated_c, report.values[i] / envelope(report.distances[i]));
  // Verify the calibrated envelope at the geometric midpoints of the sweep.
  report.bound_holds = std::isfinite(report.calibrated_c);
  for (std::size_t i = 1; i < report.distances.size(); ++i) {
    double mid = std::sqrt(report.distances[i - 1] * report.distances[i]);
    if (integral_at(mid) > report.calibrated_c * envelope(mid) * (1.0 + 0.05)) report.bound_holds = false;
  }
  if (!report.distances.empty()) {
    double far = report.distances.back();
    double mass = sphere_area(dim) * std::pow(radius, dim - b) / (dim - b);
    report.far_field_ratio = report.values.back() * std::pow(far, a) / mass;
  }
  return report;
}

SeriesResult boundary_kernel_series(int K, const CylinderSpec& cyl, const KernelSpec& k, double tau,
                                    std::span<const double> z, double s, std::span<const double> v,
                                    const SeriesQuadrature& quad) {
  k.validate();
  if (K < 1) throw std::invalid_argument("boundary_kernel_series: K must be at least 1");
  if (!(tau > s)) throw std::invalid_argument("boundary_kernel_series: need tau > s");
  if (s < cyl.t_in - 1e-12) throw std::invalid_argument("boundary_kernel_series: need s >= t_in");
  require_point(z, k);
  require_point(v, k);

  SeriesResult result;
  std::vector<double> diff(k.dim);
  for (int d = 0; d < k.dim; ++d) diff[d] = z[d] - v[d];
  result.terms.push_back(gaussian(tau - s, diff, k));

  if (K > 1) {
    double half_width = quad.box_half_width > 0.0 ? quad.box_half_width : cyl.r_0;
    CellGrid cells(k.dim, quad.space_points, half_width, quad.restrict_to_ball ? cyl.r_0 : 0.0);
    HeatPotential potential(cells, k.nu_eff, s, tau, quad.time_points);
    // Level 1: cell averages of G(sigma - s, . - v).
    SpaceTimeCells level(quad.time_points, std::vector<double>(cells.size()));
    for (int m = 0; m < quad.time_points; ++m) {
      std::vector<std::vector<double>> w(k.dim);
      for (int d = 0; d < k.dim; ++d) w[d] = cells.axis_weights(potential.time(m) - s, k.nu_eff, v[d]);
      for (std::size_t j = 0; j < cells.size(); ++j) {
        std::size_t rest = j;
        double weight = 1.0;
        for (int d = k.dim - 1; d >= 0; --d) {
          weight *= w[d][rest % quad.space_points];
          rest /= quad.space_points;
        }
        level[m][j] = weight / cells.volume();
      }
    }
    for (int order = 2; order <= K; ++order) {
      result.terms.push_back(potential.apply_at(level, quad.time_points, z));
      if (order < K) level = potential.apply(level);
    }
  }
  for (double term : result.terms) result.sum += term;
  result.tail_estimate = std::abs(result.terms.back());
  if (result.terms.size() >= 3) {
    std::size_t m = result.terms.size();
    result.tail_decreasing = std::abs(result.terms[m - 1]) < std::abs(result.terms[m - 2]) &&
                             std::abs(result.terms[m - 2]) < std::abs(result.terms[m - 3]);
  }
  return result;
}

double kernel_composition(const KernelSpec& k, double t1, double t2, std::span<const double> u,
                          std::span<const double> v, double half_width, int points, double radius) {
  k.validate();
  require_point(u, k);
  require_point(v, k);
  CellGrid cells(k.dim, points, half_width, radius);
  std::vector<double> a(k.dim), b(k.dim);
  double sum = 0.0;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (!cells.inside(j)) continue;
    auto w = cells.center(j);
    for (int d = 0; d < k.dim; ++d) {
      a[d] = u[d] - w[d];
      b[d] = w[d] - v[d];
    }
    sum += gaussian(t1, a, k) * gaussian(t2, b, k);
  }
  return sum * cells.volume();
}

DuhamelReport duhamel_residual(const DuhamelProblem& problem, double tau,
                               const std::vector<std::vector<double>>& probes, const DuhamelQuadrature& quad) {
  const KernelSpec& k = problem.kernel;
  k.validate();
  const CylinderSpec& cyl = problem.cylinder;
  const int n = k.dim;
  if (cyl.dim != n) throw std::invalid_argument("duhamel_residual: cylinder and kernel dimensions differ");
  if (!problem.field) throw std::invalid_argument("duhamel_residual: field is required");
  const double t_in = cyl.t_in;
  if (!(tau > t_in)) throw std::invalid_argument("duhamel_residual: need tau > t_in");
  if (problem.coverage_begin > t_in + 1e-12 || problem.coverage_end < tau - 1e-12)
    throw std::out_of_range("duhamel_residual: field snapshots do not cover [t_in, tau]");
  if (problem.series_order < 0) throw std::invalid_argument("duhamel_residual: series order must be non-negative");
  for (const auto& z : probes) require_point(z, k);

  DuhamelReport report;
  const std::size_t P = probes.size();
  report.initial_term.assign(P, 0.0);
  report.source_term.assign(P, 0.0);
  report.boundary_term.assign(P, 0.0);

  // Initial convolution, midpoint rule over the cells inside the ball.
  CellGrid initial_cells(n, quad.initial_points, cyl.r_0, cyl.r_0);
  std::vector<double> w0(initial_cells.size(), 0.0);
  for (std::size_t j = 0; j < initial_cells.size(); ++j)
    if (initial_cells.inside(j)) w0[j] = problem.field(t_in, initial_cells.center(j));
  parallel_for(P, [&](std::size_t p) {
    std::vector<double> diff(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < initial_cells.size(); ++j) {
      if (w0[j] == 0.0) continue;
      auto c = initial_cells.center(j);
      for (int d = 0; d < n; ++d) diff[d] = probes[p][d] - c[d];
      sum += w0[j] * gaussian(tau - t_in, diff, k);
    }
    report.initial_term[p] = sum * initial_cells.volume();
  });

  const bool has_source = static_cast<bool>(problem.source);
  if (has_source || problem.include_boundary) {
    CellGrid cells(n, quad.space_points, cyl.r_0, cyl.r_0);
    HeatPotential potential(cells, k.nu_eff, t_in, tau, quad.time_points);
    const int M = quad.time_points;

    SpaceTimeCells source_cells;
    if (has_source) {
      source_cells.assign(M, std::vector<double>(cells.size(), 0.0));
      for (int m = 0; m < M; ++m)
        for (std::size_t j = 0; j < cells.size(); ++j)
          if (cells.inside(j)) source_cells[m][j] = problem.source(potential.time(m), cells.center(j));
      parallel_for(P, [&](std::size_t p) { report.source_term[p] = potential.apply_at(source_cells, M, probes[p]); });
    }

    if (problem.include_boundary) {
      std::vector<double> initial(cells.size(), 0.0);
      for (std::size_t j = 0; j < cells.size(); ++j)
        if (cells.inside(j)) initial[j] = problem.field(t_in, cells.center(j));

      // Interior data of the series: -2 w + 2 (w_0 * G) - 2 (N * G).
      SpaceTimeCells bracket(M, std::vector<double>(cells.size(), 0.0));
      SpaceTimeCells source_potential;
      if (has_source) source_potential = potential.apply(source_cells);
      for (int m = 0; m < M; ++m) {
        double sigma = potential.time(m);
        std::vector<double> spread = cells.convolve(initial, sigma - t_in, k.nu_eff);
        for (std::size_t j = 0; j < cells.size(); ++j) {
          if (!cells.inside(j)) continue;
          double value = -2.0 * problem.field(sigma, cells.center(j)) + 2.0 * spread[j];
          if (has_source) value -= 2.0 * source_potential[m][j];
          bracket[m][j] = value;
        }
      }
      // Sum of T^k bracket for k = 1..K is T applied to bracket + T bracket + ... + T^{K-1} bracket.
      SpaceTimeCells partial;
      if (problem.series_order > 0) {
        partial = bracket;
        SpaceTimeCells power = bracket;
        for (int order = 2; order <= problem.series_order; ++order) {
          power = potential.apply(power);
          for (int m = 0; m < M; ++m)
            for (std::size_t j = 0; j < cells.size(); ++j) partial[m][j] += power[m][j];
        }
      }

      SurfaceNodes surface = sphere_nodes(n, cyl.r_0, quad.boundary_points);
      const std::size_t S = surface.points.size();
      const double outer_sign = problem.variant == BoundaryVariant::outer_plus ? 1.0 : -1.0;
      std::vector<double> boundary_data(static_cast<std::size_t>(M) * S);
      parallel_for(static_cast<std::size_t>(M) * S, [&](std::size_t idx) {
        int m = static_cast<int>(idx / S);
        const auto& y = surface.points[idx % S];
        double sigma = potential.time(m);
        double value = -2.0 * problem.field(sigma, y) + 2.0 * cells.contract(initial, sigma - t_in, k.nu_eff, y);
        if (has_source) value += outer_sign * 2.0 * potential.apply_at(source_cells, m, y);
        if (problem.series_order > 0) value += potential.apply_at(partial, m, y);
        boundary_data[idx] = value;
      });
      parallel_for(P, [&](std::size_t p) {
        std::vector<double> diff(n);
        double sum = 0.0;
        for (int m = 0; m < M; ++m) {
          double lag = tau - potential.time(m);
          for (std::size_t b = 0; b < S; ++b) {
            for (int d = 0; d < n; ++d) diff[d] = probes[p][d] - surface.points[b][d];
            sum += boundary_data[m * S + b] * surface.weights[b] * gaussian(lag, diff, k);
          }
        }
        report.boundary_term[p] = sum * potential.step();
      });
    }
  }

  double sq = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    double lhs = problem.field(tau, probes[p]);
    double rhs = report.initial_term[p] + report.source_term[p] + report.boundary_term[p];
    report.lhs.push_back(lhs);
    report.rhs.push_back(rhs);
    double gap = std::abs(lhs - rhs);
    report.residual = std::max(report.residual, gap);
    sq += gap * gap;
  }
  report.rms = P > 0 ? std::sqrt(sq / P) : 0.0;
  return report;
}

SymmetricConvolution symmetric_convolution(const std::function<double(std::span<const double>)>& l, double l0,
                                           std::span<const double> x, int j, double t, const KernelSpec& k,
                                           int points, double extent) {
  k.validate();
  require_point(x, k);
  if (!(t > 0.0)) throw std::domain_error("symmetric_convolution: t must be positive");
  if (j < 0 || j >= k.dim) throw std::out_of_range("symmetric_convolution: direction out of range");
  const int n = k.dim;
  const double L = extent * std::sqrt(2.0 * k.nu_eff * t);
  const double h_half = L / points;
  const double h_full = 2.0 * L / points;
  double cell = h_half;
  for (int d = 0; d < n; ++d)
    if (d != j) cell *= h_full;

  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(points);
  std::vector<double> y(n), a(n), b(n);
  SymmetricConvolution out;
  double value = 0.0, majorant = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int d = n - 1; d >= 0; --d) {
      int q = static_cast<int>(rest % points);
      rest /= points;
      y[d] = d == j ? (q + 0.5) * h_half : -L + (q + 0.5) * h_full;
    }
    for (int d = 0; d < n; ++d) {
      a[d] = x[d] - y[d];
      b[d] = d == j ? x[d] + y[d] : x[d] - y[d];
    }
    double g = gaussian_derivative(t, y, j, k);
    value += (l(a) - l(b)) * g;
    majorant += 2.0 * y[j] * std::abs(g);
  }
  out.value = value * cell;
  out.quadrature_majorant = l0 * majorant * cell;
  out.bound = l0;
  return out;
}

}  // namespace nslb
