#include "nslb/singularity_lab.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nslb {
namespace {

double log_node(double lo, double hi, int count, int i) {
  return count == 1 ? lo : lo * std::pow(hi / lo, double(i) / (count - 1));
}

double decades(double lo, double hi) { return std::log10(hi / lo); }

double magnitude(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

}  // namespace

std::vector<ConeSample> cone_layout(const ConeSpec& cone, const SampleLayout& layout) {
  if (layout.gap_levels < 2 || layout.radius_levels < 2)
    throw std::invalid_argument("cone_layout: need at least two gap and radius levels");
  if (!(layout.radius_fraction_min > 0.0 && layout.radius_fraction_max <= 1.0 &&
        layout.radius_fraction_min < layout.radius_fraction_max))
    throw std::invalid_argument("cone_layout: radius fractions must satisfy 0 < min < max <= 1");
  const int n = cone.dim();
  const double r0 = cone.t_s() - cone.t_1();
  const double gap_max = r0;
  const double gap_min = std::max(layout.tip_exclusion, r0 * std::pow(10.0, -layout.gap_decades));
  if (!(gap_min < gap_max)) throw std::invalid_argument("cone_layout: cone too short for the tip exclusion");

  std::mt19937_64 rng(layout.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ConeSample> samples;
  for (int i = 0; i < layout.gap_levels; ++i) {
    double gap = log_node(gap_min, gap_max, layout.gap_levels, i);
    for (int k = 0; k < layout.radius_levels; ++k) {
      double fraction = log_node(layout.radius_fraction_min, layout.radius_fraction_max, layout.radius_levels, k);
      double radius = fraction * gap;
      std::vector<double> dir(n);
      for (double& c : dir) c = normal(rng);
      double norm = magnitude(dir);
      if (radius < layout.tip_exclusion || norm == 0.0) continue;
      ConeSample s;
      s.gap = gap;
      s.radius = radius;
      s.t = cone.t_s() - gap;
      s.x.resize(n);
      for (int d = 0; d < n; ++d) s.x[d] = cone.x_s()[d] + radius * dir[d] / norm;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

double singular_value(double c, double lambda, double mu, double gap, double radius) {
  return c / (std::pow(gap, mu) * std::pow(radius, lambda));
}

std::vector<ConeSample> synthesize_singular_field(double c, double lambda, double mu, const ConeSpec& cone,
                                                  double noise, const SampleLayout& layout) {
  if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("synthesize_singular_field: exponents must be >= 0");
  std::vector<ConeSample> samples = cone_layout(cone, layout);
  std::mt19937_64 rng(layout.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& s : samples) {
    double factor = noise > 0.0 ? 1.0 + noise * normal(rng) : 1.0;
    s.value = singular_value(c, lambda, mu, s.gap, s.radius) * factor;
  }
  return samples;
}

std::vector<ConeSample> sample_on_cone(const FieldSource& source, const ConeSpec& cone, const SampleLayout& layout) {
  if (source.dim() != cone.dim()) throw std::invalid_argument("sample_on_cone: dimension mismatch");
  std::vector<ConeSample> samples = cone_layout(cone, layout);
  std::vector<double> out(source.components());
  for (auto& s : samples) {
    source.evaluate(s.t, s.x, out);
    s.value = magnitude(out);
  }
  return samples;
}

std::vector<ConeSample> sample_grid_nodes(std::span<const double> times, std::span<const PhysicalField> fields,
                                          const ConeSpec& cone, const NodeSampling& sampling) {
  if (times.size() != fields.size()) throw std::invalid_argument("sample_grid_nodes: times and fields differ in length");
  const int n = cone.dim();
  std::vector<ConeSample> samples;
  for (std::size_t s = 0; s < fields.size(); ++s) {
    const PhysicalField& f = fields[s];
    const TorusGrid& grid = f.grid();
    if (grid.dim() != n) throw std::invalid_argument("sample_grid_nodes: snapshot dimension differs from the cone");
    double gap = cone.t_s() - times[s];
    if (times[s] < cone.t_1() || gap < sampling.tip_exclusion) continue;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      MultiIndex idx = grid.unflatten(j);
      std::vector<double> x(n);
      double r2 = 0.0;
      for (int d = 0; d < n; ++d) {
        x[d] = grid.coordinate(idx[d]);
        double diff = x[d] - cone.x_s()[d];
        diff -= std::round(diff);
        r2 += diff * diff;
      }
      double radius = std::sqrt(r2);
      if (radius < sampling.tip_exclusion || radius > sampling.radius_fraction * gap) continue;
      double v2 = 0.0;
      for (int c = 0; c < f.components(); ++c) v2 += f.at(c, j) * f.at(c, j);
      ConeSample sample;
      sample.t = times[s];
      sample.x = std::move(x);
      sample.gap = gap;
      sample.radius = radius;
      sample.value = std::sqrt(v2);
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

SingularityFit fit_singularity_orders(const std::vector<ConeSample>& samples, const FitOptions& options) {
  std::vector<const ConeSample*> usable;
  for (const auto& s : samples)
    if (s.gap > 0.0 && s.radius > 0.0 && std::isfinite(s.value) && s.value != 0.0) usable.push_back(&s);
  if (usable.size() < options.min_samples) {
    std::ostringstream msg;
    msg << "fit_singularity_orders: " << usable.size() << " usable samples, need " << options.min_samples;
    throw std::invalid_argument(msg.str());
  }
  double gmin = usable.front()->gap, gmax = gmin, rmin = usable.front()->radius, rmax = rmin;
  for (const auto* s : usable) {
    gmin = std::min(gmin, s->gap);
    gmax = std::max(gmax, s->gap);
    rmin = std::min(rmin, s->radius);
    rmax = std::max(rmax, s->radius);
  }
  if (decades(gmin, gmax) < options.min_decades || decades(rmin, rmax) < options.min_decades) {
    std::ostringstream msg;
    msg << "fit_singularity_orders: degenerate sample spread (gap " << decades(gmin, gmax) << " decades, radius "
        << decades(rmin, rmax) << " decades; need " << options.min_decades << ")";
    throw std::invalid_argument(msg.str());
  }

  const Eigen::Index m = static_cast<Eigen::Index>(usable.size());
  Eigen::MatrixXd A(m, 3);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = -std::log(usable[i]->gap);
    A(i, 2) = -std::log(usable[i]->radius);
    b(i) = std::log(std::abs(usable[i]->value));
  }
  Eigen::Vector3d coef = A.colPivHouseholderQr().solve(b);
  SingularityFit fit;
  fit.sample_count = usable.size();
  fit.c = std::exp(coef(0));
  fit.raw_mu = coef(1);
  fit.raw_lambda = coef(2);
  fit.residual = std::sqrt((A * coef - b).squaredNorm() / static_cast<double>(m));
  fit.mu = std::max(0.0, fit.raw_mu);
  fit.lambda = std::max(0.0, fit.raw_lambda);
  fit.clamped = fit.raw_mu < 0.0 || fit.raw_lambda < 0.0;
  return fit;
}

CknVerdict ckn_gate(double mu, double lambda, double eps) {
  CknVerdict v;
  v.velocity_ok = mu < kVelocityMuLimit && lambda < kVelocityLambdaLimit;
  v.gradient_ok = mu < kGradientMuLimit && lambda < kGradientLambdaLimit + eps;
  return v;
}

CknVerdict ckn_gate(const SingularityFit& fit, double eps) { return ckn_gate(fit.mu, fit.lambda, eps); }

DampedField damped_field(const std::vector<ConeSample>& samples, double lambda, double mu) {
  DampedField out;
  out.samples = samples;
  bool first = true;
  for (auto& s : out.samples) {
    s.value = std::pow(s.gap, mu) * std::pow(s.radius, lambda) * std::abs(s.value);
    if (!std::isfinite(s.value)) {
      out.finite = false;
      continue;
    }
    out.max = first ? s.value : std::max(out.max, s.value);
    out.min = first ? s.value : std::min(out.min, s.value);
    first = false;
  }
  return out;
}

std::vector<double> tau_ladder(double tau_min, double tau_max, int count) {
  if (!(tau_min > 0.0 && tau_max > tau_min) || count < 2) throw std::invalid_argument("tau_ladder: bad range");
  std::vector<double> taus(count);
  for (int i = 0; i < count; ++i) taus[i] = log_node(tau_min, tau_max, count, i);
  return taus;
}

ScanReport uniform_bound_scan(const FieldSource& source, const ConeSpec& cone, const std::vector<double>& taus,
                              const std::vector<double>& z_probe, double slope_threshold) {
  if (taus.size() < 3) throw std::invalid_argument("uniform_bound_scan: ladder needs at least 3 entries");
  for (std::size_t i = 1; i < taus.size(); ++i)
    if (!(taus[i] > taus[i - 1])) throw std::invalid_argument("uniform_bound_scan: ladder must increase");
  if (!(taus.front() > 0.0) || decades(taus.front(), taus.back()) < 2.0 - 1e-12)
    throw std::invalid_argument("uniform_bound_scan: ladder must cover at least two decades");

  ScanReport report;
  std::vector<double> out(source.components());
  double sup = 0.0;
  for (double tau : taus) {
    std::vector<double> x = x_of_z(z_probe, tau, cone);
    source.evaluate(t_of_tau(tau, cone), x, out);
    double value = magnitude(out);
    sup = std::max(sup, value);
    report.taus.push_back(tau);
    report.values.push_back(value);
    report.running_sup.push_back(sup);
  }
  report.sup = sup;

  const double decade_start = taus.back() / 10.0;
  std::vector<double> lx, ly;
  double sup_at_start = -1.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < decade_start) continue;
    if (sup_at_start < 0.0) sup_at_start = report.running_sup[i];
    if (report.running_sup[i] <= 0.0) continue;
    lx.push_back(std::log(1.0 + taus[i]));
    ly.push_back(std::log(report.running_sup[i]));
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
    report.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  report.last_decade_increment = sup > 0.0 ? (sup - sup_at_start) / sup : 0.0;
  report.bounded = report.slope < slope_threshold;
  return report;
}

bool embedding_gain(double r, double q, double s, double p, int n) {
  if (q < 1.0 || p < 1.0) throw std::invalid_argument("embedding_gain: need p, q >= 1");
  if (n < 1) throw std::invalid_argument("embedding_gain: dimension must be positive");
  return std::abs((1.0 / q - 1.0 / p) - (r - s) / n) <= 1e-12;
}

std::vector<SobolevSpace> bootstrap_ledger(double s, double p, int steps, int n, double eps) {
  if (steps < 0) throw std::invalid_argument("bootstrap_ledger: steps must be non-negative");
  if (p < 1.0) throw std::invalid_argument("bootstrap_ledger: p must be >= 1");
  std::vector<SobolevSpace> ledger;
  double embedded = s - n * (1.0 / p - 0.5);
  {
    std::ostringstream why;
    why << "embedding H^{" << s << "," << p << "} -> H^{" << embedded << ",2}";
    ledger.push_back({embedded, 2.0, why.str()});
  }
  for (int k = 1; k <= steps; ++k) {
    std::ostringstream why;
    why << "one derivative from the representation, H^{" << k << "-eps}";
    ledger.push_back({k - eps, 2.0, why.str()});
  }
  return ledger;
}

bool ledger_consistent(double s, double p, const std::vector<SobolevSpace>& ledger, int n) {
  double prev_s = s, prev_p = p;
  for (const auto& space : ledger) {
    bool embedding = embedding_gain(prev_s, prev_p, space.s, space.p, n);
    double gain = space.s - prev_s;
    bool derivative_step = prev_p == 2.0 && space.p == 2.0 && gain > 0.0 && gain <= 1.0 + 1e-12;
    if (!embedding && !derivative_step) return false;
    prev_s = space.s;
    prev_p = space.p;
  }
  return true;
}

}  // namespace nslb
