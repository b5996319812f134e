#include "nslb/cone_cylinder.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nslb/leray.hpp"

namespace nslb {
namespace {

constexpr double kTimeSlack = 1e-12;

void require_dim(std::span<const double> x, int dim) {
  if (static_cast<int>(x.size()) != dim) throw std::invalid_argument("point dimension mismatch");
}

// Second-order first derivative of samples f[0..P) with stride along one axis.
double first_difference(const std::vector<double>& f, std::size_t base, std::size_t stride, int k, int points,
                        double h) {
  auto at = [&](int m) { return f[base + static_cast<std::size_t>(m) * stride]; };
  if (k == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (k == points - 1) return (3.0 * at(k) - 4.0 * at(k - 1) + at(k - 2)) / (2.0 * h);
  return (at(k + 1) - at(k - 1)) / (2.0 * h);
}

double second_difference(const std::vector<double>& f, std::size_t base, std::size_t stride, int k, int points,
                         double h) {
  auto at = [&](int m) { return f[base + static_cast<std::size_t>(m) * stride]; };
  if (k == 0) return (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
  if (k == points - 1) return (2.0 * at(k) - 5.0 * at(k - 1) + 4.0 * at(k - 2) - at(k - 3)) / (h * h);
  return (at(k + 1) - 2.0 * at(k) + at(k - 1)) / (h * h);
}

std::size_t axis_stride(const BoxGrid& grid, int direction) {
  std::size_t stride = 1;
  for (int d = grid.dim - 1; d > direction; --d) stride *= grid.points;
  return stride;
}

std::vector<double> component_values(const ComparisonField& w, int component) {
  auto begin = w.values.begin() + static_cast<std::ptrdiff_t>(component * w.grid.size());
  return {begin, begin + static_cast<std::ptrdiff_t>(w.grid.size())};
}

std::vector<double> derivative_of(const std::vector<double>& f, const BoxGrid& grid, int direction) {
  std::vector<double> out(f.size());
  const std::size_t stride = axis_stride(grid, direction);
  const double h = grid.spacing();
  for (std::size_t j = 0; j < f.size(); ++j) {
    int k = grid.unflatten(j)[direction];
    out[j] = first_difference(f, j - k * stride, stride, k, grid.points, h);
  }
  return out;
}

}  // namespace

ConeSpec::ConeSpec(double t_s, std::vector<double> x_s, double t_1, double rho)
    : t_s_(t_s), x_s_(std::move(x_s)), t_1_(t_1) {
  if (rho != 1.0) throw std::invalid_argument("cone: only rho = 1 is supported");
  if (!(t_s > 0.0)) throw std::invalid_argument("cone: t_s must be positive");
  if (!(t_1 > 0.0 && t_1 < t_s)) throw std::invalid_argument("cone: need 0 < t_1 < t_s");
  if (x_s_.size() != 2 && x_s_.size() != 3) throw std::invalid_argument("cone: x_s must have 2 or 3 entries");
}

CylinderSpec cylinder_of(const ConeSpec& cone) {
  CylinderSpec cyl;
  cyl.dim = cone.dim();
  cyl.r_0 = cone.t_s() - cone.t_1();
  cyl.t_in = cone.t_1() / cyl.r_0;
  return cyl;
}

double tau_of_t(double t, const ConeSpec& cone) {
  if (!(t < cone.t_s())) throw std::domain_error("tau_of_t: t must be below t_s");
  if (t < 0.0) throw std::domain_error("tau_of_t: t must be non-negative");
  return t / (cone.t_s() - t);
}

double t_of_tau(double tau, const ConeSpec& cone) {
  if (tau < 0.0) throw std::domain_error("t_of_tau: tau must be non-negative");
  return cone.t_s() * tau / (1.0 + tau);
}

double dtau_dt(double t, const ConeSpec& cone) {
  if (!(t < cone.t_s())) throw std::domain_error("dtau_dt: t must be below t_s");
  double gap = cone.t_s() - t;
  return cone.t_s() / (gap * gap);
}

MuCoefficients mu_coeffs(double tau, const ConeSpec& cone) {
  if (tau < 0.0) throw std::domain_error("mu_coeffs: tau must be non-negative");
  return {1.0 / (1.0 + tau), 1.0 / cone.t_s()};
}

double derivative_rescale(int order, double tau, const ConeSpec& cone) {
  if (order < 0) throw std::invalid_argument("derivative order must be non-negative");
  return std::pow((1.0 + tau) / cone.t_s(), order);
}

double derivative_rescale(std::span<const int> alpha, double tau, const ConeSpec& cone) {
  int order = 0;
  for (int a : alpha) {
    if (a < 0) throw std::invalid_argument("multi-index entries must be non-negative");
    order += a;
  }
  return derivative_rescale(order, tau, cone);
}

std::vector<double> x_of_z(std::span<const double> z, double tau, const ConeSpec& cone) {
  require_dim(z, cone.dim());
  double gap = cone.t_s() / (1.0 + tau);
  std::vector<double> x(z.size());
  for (std::size_t d = 0; d < z.size(); ++d) x[d] = cone.x_s()[d] + gap * z[d];
  return x;
}

FunctionSource::FunctionSource(int dim, int components, Fn fn, double t_min, double t_max)
    : dim_(dim), components_(components), fn_(std::move(fn)), t_min_(t_min), t_max_(t_max) {}

void FunctionSource::evaluate(double t, std::span<const double> x, std::span<double> out) const {
  require_dim(x, dim_);
  if (t < t_min_ - kTimeSlack || t > t_max_ + kTimeSlack)
    throw std::out_of_range("source evaluated outside its time range");
  fn_(t, x, out);
}

SnapshotSource::SnapshotSource(std::vector<double> times, std::vector<PhysicalField> snapshots)
    : times_(std::move(times)), snapshots_(std::move(snapshots)) {
  if (times_.empty() || times_.size() != snapshots_.size())
    throw std::invalid_argument("snapshot source needs one field per time");
  grid_ = snapshots_.front().grid();
  components_ = snapshots_.front().components();
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!(snapshots_[k].grid() == grid_) || snapshots_[k].components() != components_)
      throw std::invalid_argument("snapshot shapes differ");
    if (k > 0 && !(times_[k] > times_[k - 1])) throw std::invalid_argument("snapshot times must increase");
  }
}

SnapshotSource SnapshotSource::from_trajectory(const Trajectory& traj) {
  std::vector<PhysicalField> fields;
  for (const auto& v : traj.snapshots) fields.push_back(to_grid(v));
  return SnapshotSource(traj.times, std::move(fields));
}

SnapshotSource SnapshotSource::pressure_of(const Trajectory& traj) {
  std::vector<PhysicalField> fields;
  for (const auto& v : traj.snapshots) fields.push_back(to_grid(poisson_pressure(v)));
  return SnapshotSource(traj.times, std::move(fields));
}

void SnapshotSource::interpolate(const PhysicalField& f, std::span<const double> x,
                                 std::span<double> out) const {
  const int n = grid_.dim();
  const int N = grid_.modes();
  int base[3] = {0, 0, 0};
  double frac[3] = {0.0, 0.0, 0.0};
  for (int d = 0; d < n; ++d) {
    double s = x[d] * N;
    double fl = std::floor(s);
    frac[d] = s - fl;
    base[d] = static_cast<int>(((static_cast<long>(fl) % N) + N) % N);
  }
  for (int c = 0; c < components_; ++c) out[c] = 0.0;
  for (int corner = 0; corner < (1 << n); ++corner) {
    double weight = 1.0;
    MultiIndex index{0, 0, 0};
    for (int d = 0; d < n; ++d) {
      bool upper = (corner >> d) & 1;
      weight *= upper ? frac[d] : 1.0 - frac[d];
      index[d] = (base[d] + (upper ? 1 : 0)) % N;
    }
    if (weight == 0.0) continue;
    std::size_t node = grid_.flatten(index);
    for (int c = 0; c < components_; ++c) out[c] += weight * f.at(c, node);
  }
}

void SnapshotSource::evaluate(double t, std::span<const double> x, std::span<double> out) const {
  require_dim(x, grid_.dim());
  if (t < times_.front() - kTimeSlack || t > times_.back() + kTimeSlack) {
    std::ostringstream msg;
    msg << "time " << t << " outside snapshot coverage [" << times_.front() << ", " << times_.back() << "]";
    throw std::out_of_range(msg.str());
  }
  if (times_.size() == 1) {
    interpolate(snapshots_.front(), x, out);
    return;
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t k = std::clamp<std::size_t>(it - times_.begin(), 1, times_.size() - 1);
  double t0 = times_[k - 1];
  double t1 = times_[k];
  double theta = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
  std::vector<double> a(components_), b(components_);
  interpolate(snapshots_[k - 1], x, a);
  interpolate(snapshots_[k], x, b);
  for (int c = 0; c < components_; ++c) out[c] = (1.0 - theta) * a[c] + theta * b[c];
}

void BoxGrid::validate() const {
  if (dim != 2 && dim != 3) throw std::invalid_argument("box grid dimension must be 2 or 3");
  if (points < 5) throw std::invalid_argument("box grid needs at least 5 points per axis");
  if (!(radius > 0.0)) throw std::invalid_argument("box grid radius must be positive");
  if (!(half_width >= radius + spacing())) throw std::invalid_argument("box grid leaves no rim outside the ball");
}

std::size_t BoxGrid::size() const {
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(points);
  return total;
}

MultiIndex BoxGrid::unflatten(std::size_t flat) const {
  MultiIndex index{0, 0, 0};
  for (int d = dim - 1; d >= 0; --d) {
    index[d] = static_cast<int>(flat % points);
    flat /= points;
  }
  return index;
}

std::size_t BoxGrid::flatten(const MultiIndex& index) const {
  std::size_t flat = 0;
  for (int d = 0; d < dim; ++d) flat = flat * points + index[d];
  return flat;
}

std::vector<double> BoxGrid::node(std::size_t flat) const {
  MultiIndex index = unflatten(flat);
  std::vector<double> z(dim);
  for (int d = 0; d < dim; ++d) z[d] = -half_width + index[d] * spacing();
  return z;
}

bool BoxGrid::in_ball(std::size_t flat) const {
  double r2 = 0.0;
  for (double c : node(flat)) r2 += c * c;
  return r2 <= radius * radius * (1.0 + 1e-12);
}

BoxGrid cylinder_box(const CylinderSpec& cyl, int points) {
  if (points < 7) throw std::invalid_argument("cylinder box needs at least 7 points per axis");
  BoxGrid grid;
  grid.dim = cyl.dim;
  grid.points = points;
  grid.radius = cyl.r_0;
  grid.half_width = cyl.r_0 * (points - 1) / static_cast<double>(points - 5);
  return grid;
}

ComparisonField sample_w(const FieldSource& source, const ConeSpec& cone, double tau, const BoxGrid& grid,
                         double margin) {
  grid.validate();
  if (source.dim() != cone.dim() || grid.dim != cone.dim())
    throw std::invalid_argument("sample_w: dimension mismatch");
  if (grid.half_width > cylinder_of(cone).r_0 * (1.0 + margin))
    throw std::invalid_argument("sample_w: box extends beyond the allowed margin around the base ball");
  double t = t_of_tau(tau, cone);
  auto [t_min, t_max] = source.time_range();
  if (t < t_min - kTimeSlack || t > t_max + kTimeSlack) {
    std::ostringstream msg;
    msg << "sample_w: tau=" << tau << " maps to t=" << t << " outside the covered range [" << t_min << ", "
        << t_max << "]";
    throw std::out_of_range(msg.str());
  }
  ComparisonField w;
  w.tau = tau;
  w.grid = grid;
  w.components = source.components();
  w.values.assign(grid.size() * w.components, 0.0);
  std::vector<double> out(w.components);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    std::vector<double> z = grid.node(j);
    std::vector<double> x = x_of_z(z, tau, cone);
    source.evaluate(t, x, out);
    for (int c = 0; c < w.components; ++c) w.at(c, j) = out[c];
  }
  return w;
}

std::vector<double> fd_derivative(const ComparisonField& w, int component, int direction) {
  return derivative_of(component_values(w, component), w.grid, direction);
}

std::vector<double> fd_laplacian(const ComparisonField& w, int component) {
  std::vector<double> f = component_values(w, component);
  std::vector<double> out(f.size(), 0.0);
  const double h = w.grid.spacing();
  for (int d = 0; d < w.grid.dim; ++d) {
    const std::size_t stride = axis_stride(w.grid, d);
    for (std::size_t j = 0; j < f.size(); ++j) {
      int k = w.grid.unflatten(j)[d];
      out[j] += second_difference(f, j - k * stride, stride, k, w.grid.points, h);
    }
  }
  return out;
}

std::vector<double> divergence_z(const ComparisonField& w) {
  if (w.components != w.grid.dim) throw std::invalid_argument("divergence_z needs n components");
  std::vector<double> out(w.grid.size(), 0.0);
  for (int d = 0; d < w.grid.dim; ++d) {
    std::vector<double> dd = fd_derivative(w, d, d);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += dd[j];
  }
  return out;
}

double max_divergence_in_ball(const ComparisonField& w) {
  std::vector<double> div = divergence_z(w);
  double worst = 0.0;
  for (std::size_t j = 0; j < div.size(); ++j)
    if (w.grid.in_ball(j)) worst = std::max(worst, std::abs(div[j]));
  return worst;
}

TransformedRhs transformed_rhs(const ComparisonField& w, const ComparisonField& outer_pressure,
                               const ConeSpec& cone, double nu) {
  const BoxGrid& grid = w.grid;
  grid.validate();
  const int n = grid.dim;
  if (w.components != n) throw std::invalid_argument("transformed_rhs: w needs n components");
  if (outer_pressure.components != 1 || outer_pressure.grid.points != grid.points ||
      outer_pressure.grid.half_width != grid.half_width)
    throw std::invalid_argument("transformed_rhs: pressure data must share the box grid");

  const std::size_t size = grid.size();
  const double h = grid.spacing();
  const MuCoefficients mu = mu_coeffs(w.tau, cone);

  std::vector<std::vector<double>> grad(n * n);  // grad[i*n+j] = w_{i,j}
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) grad[i * n + j] = fd_derivative(w, i, j);

  std::vector<long> unknown(size, -1);
  long count = 0;
  for (std::size_t j = 0; j < size; ++j)
    if (grid.in_ball(j)) unknown[j] = count++;

  // -Delta_h p = sum w_{i,j} w_{j,i} with Dirichlet data off the ball.
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs_vec = Eigen::VectorXd::Zero(count);
  const double inv_h2 = 1.0 / (h * h);
  for (std::size_t j = 0; j < size; ++j) {
    long row = unknown[j];
    if (row < 0) continue;
    double source = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) source += grad[a * n + b][j] * grad[b * n + a][j];
    rhs_vec[row] = source;
    triplets.emplace_back(row, row, 2.0 * n * inv_h2);
    MultiIndex index = grid.unflatten(j);
    for (int d = 0; d < n; ++d) {
      for (int s : {-1, 1}) {
        MultiIndex nb = index;
        nb[d] += s;
        std::size_t m = grid.flatten(nb);
        if (unknown[m] >= 0)
          triplets.emplace_back(row, unknown[m], -inv_h2);
        else
          rhs_vec[row] += outer_pressure.values[m] * inv_h2;
      }
    }
  }
  Eigen::SparseMatrix<double> A(count, count);
  A.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success) throw std::runtime_error("transformed_rhs: pressure factorization failed");
  Eigen::VectorXd p = solver.solve(rhs_vec);

  TransformedRhs result;
  result.pressure = outer_pressure;
  result.pressure.tau = w.tau;
  for (std::size_t j = 0; j < size; ++j)
    if (unknown[j] >= 0) result.pressure.values[j] = p[unknown[j]];

  result.rhs.tau = w.tau;
  result.rhs.grid = grid;
  result.rhs.components = n;
  result.rhs.values.assign(size * n, 0.0);
  std::vector<std::vector<double>> grad_p(n);
  for (int d = 0; d < n; ++d) grad_p[d] = derivative_of(result.pressure.values, grid, d);
  for (int i = 0; i < n; ++i) {
    std::vector<double> lap = fd_laplacian(w, i);
    for (std::size_t j = 0; j < size; ++j) {
      if (unknown[j] < 0) continue;
      std::vector<double> z = grid.node(j);
      double drift = 0.0;
      for (int k = 0; k < n; ++k) drift += (w.at(k, j) + z[k]) * grad[i * n + k][j];
      result.rhs.at(i, j) = mu.mu2 * nu * lap[j] - mu.mu1 * drift - mu.mu1 * grad_p[i][j];
    }
  }
  return result;
}

ResidualReport transformed_residual(const FieldSource& velocity, const FieldSource& pressure,
                                    const ConeSpec& cone, double nu, double tau, const BoxGrid& grid,
                                    double dtau) {
  if (!(dtau > 0.0) || tau - dtau < 0.0) throw std::invalid_argument("transformed_residual: bad dtau");
  const double margin = grid.half_width / grid.radius;
  ComparisonField w = sample_w(velocity, cone, tau, grid, margin);
  ComparisonField w_plus = sample_w(velocity, cone, tau + dtau, grid, margin);
  ComparisonField w_minus = sample_w(velocity, cone, tau - dtau, grid, margin);
  ComparisonField p = sample_w(pressure, cone, tau, grid, margin);
  TransformedRhs r = transformed_rhs(w, p, cone, nu);

  ResidualReport report;
  const double cell = std::pow(grid.spacing(), grid.dim);
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!grid.in_ball(j)) continue;
    for (int i = 0; i < grid.dim; ++i) {
      double dt_w = (w_plus.at(i, j) - w_minus.at(i, j)) / (2.0 * dtau);
      double res = dt_w - r.rhs.at(i, j);
      sum += res * res * cell;
      report.max = std::max(report.max, std::abs(res));
    }
  }
  report.l2 = std::sqrt(sum);
  return report;
}

}  // namespace nslb
