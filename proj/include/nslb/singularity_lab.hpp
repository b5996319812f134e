#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nslb/cone_cylinder.hpp"

namespace nslb {

// A value sampled inside the cone, with its gap t_s - t and radius |x - x_s|.
struct ConeSample {
  double t = 0.0;
  std::vector<double> x;
  double gap = 0.0;
  double radius = 0.0;
  double value = 0.0;
};

struct SampleLayout {
  int gap_levels = 24;
  int radius_levels = 16;
  double gap_decades = 2.0;        // gaps span [r_0 10^{-decades}, r_0]
  double radius_fraction_min = 0.01;
  double radius_fraction_max = 0.9;  // radius = fraction * gap keeps the point inside the cone
  double tip_exclusion = 1e-3;       // minimum gap and minimum radius
  std::uint64_t seed = 1;
};

// Sample positions inside the cone (values left at 0). Directions are drawn
// from a seeded generator; positions are not wrapped onto the torus.
std::vector<ConeSample> cone_layout(const ConeSpec& cone, const SampleLayout& layout = {});

// f = c / (gap^mu radius^lambda) times (1 + noise * N(0, 1)) at each layout point.
std::vector<ConeSample> synthesize_singular_field(double c, double lambda, double mu, const ConeSpec& cone,
                                                  double noise = 0.0, const SampleLayout& layout = {});
double singular_value(double c, double lambda, double mu, double gap, double radius);

// |v(t, x)| at each layout point.
std::vector<ConeSample> sample_on_cone(const FieldSource& source, const ConeSpec& cone,
                                       const SampleLayout& layout = {});

struct NodeSampling {
  double radius_fraction = 0.9;  // keep nodes with radius <= fraction * gap
  double tip_exclusion = 1e-3;   // minimum gap and minimum radius
};
// |v| at every grid node of each snapshot inside the cone for t_1 <= t < t_s.
// Radii are torus distances to x_s.
std::vector<ConeSample> sample_grid_nodes(std::span<const double> times, std::span<const PhysicalField> fields,
                                          const ConeSpec& cone, const NodeSampling& sampling = {});

struct FitOptions {
  std::size_t min_samples = 30;
  double min_decades = 1.0;
};

struct SingularityFit {
  double c = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double residual = 0.0;  // RMS misfit of log|f|
  std::size_t sample_count = 0;
  bool clamped = false;   // a negative exponent was raised to 0
  double raw_lambda = 0.0;
  double raw_mu = 0.0;
};

// Least squares on log|f| = log c - mu log(gap) - lambda log(radius).
SingularityFit fit_singularity_orders(const std::vector<ConeSample>& samples, const FitOptions& options = {});

enum class GateKind { velocity, gradient };

struct CknVerdict {
  bool velocity_ok = false;  // mu < 3/8 and lambda < 3/4
  bool gradient_ok = false;  // mu < 1/2 and lambda < 3/2 + eps
  bool passes(GateKind kind) const { return kind == GateKind::velocity ? velocity_ok : gradient_ok; }
};

inline constexpr double kVelocityMuLimit = 3.0 / 8.0;
inline constexpr double kVelocityLambdaLimit = 3.0 / 4.0;
inline constexpr double kGradientMuLimit = 1.0 / 2.0;
inline constexpr double kGradientLambdaLimit = 3.0 / 2.0;

CknVerdict ckn_gate(double mu, double lambda, double eps = 0.01);
CknVerdict ckn_gate(const SingularityFit& fit, double eps = 0.01);

struct DampedField {
  std::vector<ConeSample> samples;  // gap^mu radius^lambda |v|
  double max = 0.0;
  double min = 0.0;
  bool finite = true;
};
DampedField damped_field(const std::vector<ConeSample>& samples, double lambda, double mu);

struct ScanReport {
  std::vector<double> taus;
  std::vector<double> values;       // |w(tau, z_probe)|
  std::vector<double> running_sup;
  double sup = 0.0;
  double slope = 0.0;               // log-log slope of running sup vs 1 + tau over the last decade
  double last_decade_increment = 0.0;  // relative change of the running sup over the last decade
  bool bounded = true;              // slope below the threshold
};
// Evaluates w along the fixed shifted-frame point z_probe for each tau of the ladder.
ScanReport uniform_bound_scan(const FieldSource& source, const ConeSpec& cone, const std::vector<double>& taus,
                              const std::vector<double>& z_probe, double slope_threshold = 0.05);
// Log-spaced ladder of tau values from tau_min to tau_max.
std::vector<double> tau_ladder(double tau_min, double tau_max, int count);

// 1/q - 1/p == (r - s)/n within 1e-12.
bool embedding_gain(double r, double q, double s, double p, int n);

struct SobolevSpace {
  double s = 0.0;  // smoothness
  double p = 2.0;  // integrability
  std::string justification;
};
// Start space (s, p) embedded into L2-based H^{s'} followed by K one-derivative steps
// landing on H^{k - eps}.
std::vector<SobolevSpace> bootstrap_ledger(double s, double p, int steps, int n, double eps = 0.01);
// Starting from (s, p), each consecutive pair satisfies the embedding identity or
// gains between 0 and 1 derivative in L2.
bool ledger_consistent(double s, double p, const std::vector<SobolevSpace>& ledger, int n);

}  // namespace nslb
