#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "brdsgd/engine.hpp"

namespace brdsgd {

// Inputs shared by the generalization-error bound evaluators. c1, c2 are the
// unnamed absolute constants of the bounds; they default to 1, so evaluated
// bounds are meaningful up to those constants.
struct BoundInputs {
  double rho = 0.0;
  double chi = 0.0;
  double beta = 1.0;
  int honest_count = 1;
  int byz_count = 0;
  double M = 1.0;
  double L = 1.0;
  double mu = 1.0;
  double Z = 1.0;
  double k0 = 1.0;
  double a = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;

  double rho_star() const;
  bool chi_nonzero() const { return chi > 1e-12; }
  // Throws HypothesisViolated when rho >= rho_star, InvalidArgument on
  // out-of-domain inputs.
  void validate() const;
};

double bound_strongly_convex(const BoundInputs& in, double k);
double bound_convex(const BoundInputs& in, double k);
double bound_nonconvex(const BoundInputs& in, double k);
// Requires losses in [0,1] (caller's responsibility) and in.a > 0.
double bound_nonconvex_improved(const BoundInputs& in, double k);
// The Delta term of the improved non-convex bound.
double improved_delta(const BoundInputs& in);

double consensus_bound(double c, double M, double k, double k0);

enum class BoundKind { StronglyConvex, Convex, NonConvex, NonConvexImproved };
BoundKind parse_bound_kind(const std::string& name);
double evaluate_bound(BoundKind kind, const BoundInputs& in, double k);

// Writes `k,bound` rows for k in [k_begin, k_end] with the given stride.
void write_bound_csv(std::ostream& out, BoundKind kind, const BoundInputs& in,
                     std::int64_t k_begin, std::int64_t k_end, std::int64_t stride);

struct GapEstimate {
  std::vector<std::int64_t> k;
  std::vector<double> mean;
  std::vector<double> std_error;
};

// Test-minus-train loss of the average model per recorded step, averaged
// over traces. Standard error is 0 for a single trace.
GapEstimate gen_gap(std::span<const RunTrace> traces);

// max over recorded k in [k_min, k_max] of H^k (k+k0)^2 / M^2.
double fit_consensus_constant(const RunTrace& trace, double M_hat, double k0, double k_min,
                              double k_max = std::numeric_limits<double>::infinity());

enum class GrowthModel { Constant, Log, Linear, Power };

struct GrowthFit {
  GrowthModel model = GrowthModel::Constant;
  double intercept = 0.0;
  double slope = 0.0;     // coefficient of the model's shape function
  double exponent = 0.0;  // only for Power
  double residual = 0.0;  // sum of squared residuals
};

// Least squares of y = intercept + slope * shape(k + k0) over points with k >= k_min,
// where shape is 0, ln t, t or t^exponent.
GrowthFit fit_growth(std::span<const double> k, std::span<const double> y, GrowthModel model,
                     double k0, double exponent = 0.5, double k_min = 0.0);
GrowthFit fit_growth(const StabilityTrace& stab, GrowthModel model, double k0,
                     double exponent = 0.5, double k_min = 100.0);

}  // namespace brdsgd
