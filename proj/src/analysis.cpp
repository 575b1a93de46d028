#include "brdsgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "brdsgd/error.hpp"

namespace brdsgd {
namespace {

double shifted(const BoundInputs& in, double k) {
  if (!(k >= 0.0)) throw Error(ErrorCode::InvalidArgument, "k must be >= 0");
  return k + in.k0;
}

// The three terms shared by the Z-, rho- and chi-dependent parts of every bound.
double core_terms(const BoundInputs& in) {
  const double r = in.honest_count;
  const double m2 = in.M * in.M;
  return 2.0 * m2 / (in.Z * r) + 4.0 * in.c1 * in.rho * r * m2 +
         2.0 * in.c1 * in.chi * std::sqrt(r) * m2;
}

}  // namespace

double BoundInputs::rho_star() const {
  return beta / (8.0 * std::sqrt(static_cast<double>(honest_count)));
}

void BoundInputs::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(honest_count >= 1, "honest count must be >= 1");
  require(byz_count >= 0, "Byzantine count must be >= 0");
  require(rho >= 0.0, "rho must be >= 0");
  require(chi >= 0.0, "chi must be >= 0");
  require(beta > 0.0 && beta <= 1.0, "beta must lie in (0,1]");
  require(M >= 0.0, "M must be >= 0");
  require(L > 0.0 && mu > 0.0 && Z > 0.0 && k0 > 0.0, "L, mu, Z, k0 must be positive");
  require(a > 0.0, "a must be positive");
  require(c1 > 0.0 && c2 > 0.0, "c1, c2 must be positive");
  if (!(rho < rho_star())) {
    throw Error(ErrorCode::HypothesisViolated,
                "rho = " + std::to_string(rho) + " is not below rho* = " + std::to_string(rho_star()));
  }
}

double bound_strongly_convex(const BoundInputs& in, double k) {
  in.validate();
  const double t = shifted(in, k);
  if (!(t > 1.0)) throw Error(ErrorCode::InvalidArgument, "k + k0 must exceed 1");
  const double m2 = in.M * in.M;
  double value = core_terms(in) / in.mu;
  if (in.chi_nonzero()) value += in.c2 * m2 * in.L * std::log(t) / (in.mu * in.mu * (t - 1.0));
  return value;
}

double bound_convex(const BoundInputs& in, double k) {
  in.validate();
  const double t = shifted(in, k);
  double value = core_terms(in) * std::log(t);
  if (in.chi_nonzero()) value += in.c2 * in.M * in.M * in.L;
  return value;
}

double bound_nonconvex(const BoundInputs& in, double k) {
  in.validate();
  const double t = shifted(in, k);
  double value = core_terms(in) / in.L * t;
  if (in.chi_nonzero()) value += in.c2 * in.M * in.M * t / in.L;
  return value;
}

double improved_delta(const BoundInputs& in) {
  const double r = in.honest_count;
  const double m2 = in.M * in.M;
  return 2.0 * in.a * m2 / (in.L * r) + 4.0 * in.a * in.c1 * in.rho * r * in.Z * m2 / in.L +
         2.0 * in.a * in.c1 * in.chi * std::sqrt(r) * in.Z * m2 / in.L;
}

double bound_nonconvex_improved(const BoundInputs& in, double k) {
  in.validate();
  const double t = shifted(in, k);
  const double delta = improved_delta(in);
  double value = (1.0 / in.Z + 1.0 / (in.a * in.Z)) * std::pow(delta, 1.0 / (in.a + 1.0)) *
                 std::pow(t, in.a / (in.a + 1.0));
  if (in.chi_nonzero()) {
    if (delta == 0.0) throw Error(ErrorCode::DeltaZero, "Delta vanishes while chi != 0");
    value += in.c2 * in.M * in.M / (in.L * delta);
  }
  return value;
}

double consensus_bound(double c, double M, double k, double k0) {
  if (!(c > 0.0 && M > 0.0 && k0 > 0.0 && k >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "consensus bound inputs must be positive");
  }
  const double t = k + k0;
  return c * M * M / (t * t);
}

BoundKind parse_bound_kind(const std::string& name) {
  if (name == "1" || name == "sc" || name == "strongly_convex") return BoundKind::StronglyConvex;
  if (name == "2" || name == "cvx" || name == "convex") return BoundKind::Convex;
  if (name == "3" || name == "ncvx" || name == "nonconvex") return BoundKind::NonConvex;
  if (name == "4" || name == "ncvx_improved" || name == "nonconvex_improved") {
    return BoundKind::NonConvexImproved;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown bound '" + name + "'");
}

double evaluate_bound(BoundKind kind, const BoundInputs& in, double k) {
  switch (kind) {
    case BoundKind::StronglyConvex: return bound_strongly_convex(in, k);
    case BoundKind::Convex: return bound_convex(in, k);
    case BoundKind::NonConvex: return bound_nonconvex(in, k);
    case BoundKind::NonConvexImproved: return bound_nonconvex_improved(in, k);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown bound kind");
}

void write_bound_csv(std::ostream& out, BoundKind kind, const BoundInputs& in,
                     std::int64_t k_begin, std::int64_t k_end, std::int64_t stride) {
  if (stride < 1 || k_end < k_begin) throw Error(ErrorCode::InvalidArgument, "bad k range");
  out << "k,bound\n";
  char buf[64];
  for (std::int64_t k = k_begin; k <= k_end; k += stride) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(k),
                  evaluate_bound(kind, in, static_cast<double>(k)));
    out << buf;
  }
}

GapEstimate gen_gap(std::span<const RunTrace> traces) {
  if (traces.empty()) throw Error(ErrorCode::InvalidArgument, "no traces");
  const auto& grid = traces.front().rows;
  for (const auto& t : traces) {
    if (t.rows.size() != grid.size()) throw Error(ErrorCode::GridMismatch, "trace lengths differ");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (t.rows[i].k != grid[i].k) throw Error(ErrorCode::GridMismatch, "recorded steps differ");
    }
  }
  const double n = static_cast<double>(traces.size());
  GapEstimate out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double sum = 0.0;
    for (const auto& t : traces) sum += t.rows[i].test_loss - t.rows[i].train_loss;
    const double mean = sum / n;
    double se = 0.0;
    if (traces.size() > 1) {
      double ss = 0.0;
      for (const auto& t : traces) {
        const double d = t.rows[i].test_loss - t.rows[i].train_loss - mean;
        ss += d * d;
      }
      se = std::sqrt(ss / (n - 1.0) / n);
    }
    out.k.push_back(grid[i].k);
    out.mean.push_back(mean);
    out.std_error.push_back(se);
  }
  return out;
}

double fit_consensus_constant(const RunTrace& trace, double M_hat, double k0, double k_min,
                              double k_max) {
  if (!(M_hat > 0.0)) throw Error(ErrorCode::InvalidArgument, "M estimate must be positive");
  bool any = false;
  double c = 0.0;
  for (const auto& row : trace.rows) {
    const double k = static_cast<double>(row.k);
    if (k < k_min || k > k_max) continue;
    any = true;
    const double t = k + k0;
    c = std::max(c, row.H * t * t / (M_hat * M_hat));
  }
  if (!any) throw Error(ErrorCode::EmptyWindow, "no recorded steps in the fitting window");
  return c;
}

GrowthFit fit_growth(std::span<const double> k, std::span<const double> y, GrowthModel model,
                     double k0, double exponent, double k_min) {
  if (k.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "k and y differ in length");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] < k_min) continue;
    const double t = k[i] + k0;
    double x = 0.0;
    switch (model) {
      case GrowthModel::Constant: x = 0.0; break;
      case GrowthModel::Log: x = std::log(t); break;
      case GrowthModel::Linear: x = t; break;
      case GrowthModel::Power: x = std::pow(t, exponent); break;
    }
    xs.push_back(x);
    ys.push_back(y[i]);
  }
  if (xs.size() < 10) throw Error(ErrorCode::EmptyWindow, "fewer than 10 points in the fitting window");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  GrowthFit fit;
  fit.model = model;
  fit.exponent = model == GrowthModel::Power ? exponent : 0.0;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    fit.residual += r * r;
  }
  return fit;
}

GrowthFit fit_growth(const StabilityTrace& stab, GrowthModel model, double k0, double exponent,
                     double k_min) {
  std::vector<double> k;
  std::vector<double> y;
  for (const auto& row : stab.rows) {
    k.push_back(static_cast<double>(row.k));
    y.push_back(row.delta);
  }
  return fit_growth(k, y, model, k0, exponent, k_min);
}

}  // namespace brdsgd
