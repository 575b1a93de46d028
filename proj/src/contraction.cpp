#include <algorithm>
#include <cmath>

#include "brdsgd/error.hpp"
#include "brdsgd/random.hpp"
#include "brdsgd/topology.hpp"

namespace brdsgd {
namespace {

enum class Placement { RandomBall, PrincipalAxis, DuplicateFarthest };

ParamVector gaussian_vector(std::mt19937_64& gen, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(gen);
  return v;
}

// Honest points: isotropic Gaussian cloud with a random scale, or (one trial
// in four) two tight clusters, which stresses rules that key on distances.
std::vector<ParamVector> sample_honest(std::mt19937_64& gen, int count, int dim) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = std::pow(10.0, 2.0 * unit(gen) - 1.0);
  const ParamVector offset = gaussian_vector(gen, dim) * scale;
  std::vector<ParamVector> pts;
  pts.reserve(static_cast<std::size_t>(count));
  if (unit(gen) < 0.25) {
    const ParamVector a = gaussian_vector(gen, dim) * scale;
    const ParamVector b = gaussian_vector(gen, dim) * scale;
    for (int i = 0; i < count; ++i) {
      pts.push_back(offset + (unit(gen) < 0.5 ? a : b) + 1e-3 * scale * gaussian_vector(gen, dim));
    }
  } else {
    for (int i = 0; i < count; ++i) pts.push_back(offset + scale * gaussian_vector(gen, dim));
  }
  return pts;
}

ParamVector principal_direction(const std::vector<ParamVector>& pts, const ParamVector& center) {
  const auto dim = center.size();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& p : pts) scatter += (p - center) * (p - center).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
  ParamVector dir = eig.eigenvectors().col(dim - 1);
  if (dir.norm() == 0.0) dir = ParamVector::Unit(dim, 0);
  return dir.normalized();
}

std::vector<ParamVector> place_byzantine(std::mt19937_64& gen, Placement placement, int count,
                                         const std::vector<ParamVector>& honest,
                                         const ParamVector& center, double spread) {
  const auto dim = static_cast<int>(center.size());
  const double radius = 10.0 * (spread > 0.0 ? spread : 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ParamVector> out;
  switch (placement) {
    case Placement::RandomBall:
      for (int j = 0; j < count; ++j) {
        ParamVector dir = gaussian_vector(gen, dim);
        dir.normalize();
        const double r = radius * std::pow(unit(gen), 1.0 / dim);
        out.push_back(center + r * dir);
      }
      break;
    case Placement::PrincipalAxis: {
      const ParamVector axis = principal_direction(honest, center);
      for (int j = 0; j < count; ++j) {
        const double sign = unit(gen) < 0.5 ? -1.0 : 1.0;
        out.push_back(center + sign * radius * axis);
      }
      break;
    }
    case Placement::DuplicateFarthest: {
      std::size_t far = 0;
      for (std::size_t i = 1; i < honest.size(); ++i) {
        if ((honest[i] - center).norm() > (honest[far] - center).norm()) far = i;
      }
      for (int j = 0; j < count; ++j) out.push_back(honest[far]);
      break;
    }
  }
  return out;
}

}  // namespace

ContractionEstimate estimate_contraction(const RuleSpec& rule, const Graph& g,
                                         const RoleAssignment& roles, const MixingMatrix& w,
                                         int trials, std::uint64_t seed, int dim) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  if (roles.size() != g.size()) throw Error(ErrorCode::InvalidArgument, "roles do not cover graph");
  const auto& honest_ids = roles.honest_ids();
  if (honest_ids.empty()) throw Error(ErrorCode::InvalidArgument, "no honest agents");

  std::vector<int> w_index(static_cast<std::size_t>(g.size()), -1);
  for (int i = 0; i < w.size(); ++i) w_index[static_cast<std::size_t>(w.agents[static_cast<std::size_t>(i)])] = i;

  // The rule weights are what an agent can compute locally: Metropolis over
  // its whole neighborhood, Byzantine neighbors included.
  std::vector<int> everyone(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) everyone[static_cast<std::size_t>(i)] = i;
  const Eigen::MatrixXd agent_view = metropolis_matrix(g, everyone);

  ContractionEstimate est;
  for (int t = 0; t < trials; ++t) {
    auto gen = make_stream(seed, StreamPurpose::Contraction, {static_cast<std::uint64_t>(t)});
    std::uniform_int_distribution<std::size_t> pick(0, honest_ids.size() - 1);
    const int n = honest_ids[pick(gen)];

    std::vector<int> local_honest{n};
    std::vector<int> local_byz;
    for (int m : g.neighbors(n)) (roles.is_honest(m) ? local_honest : local_byz).push_back(m);

    std::vector<double> w_row;
    const int row = w_index[static_cast<std::size_t>(n)];
    if (row < 0) throw Error(ErrorCode::InvalidArgument, "mixing matrix does not cover agent");
    for (int m : local_honest) {
      const int col = w_index[static_cast<std::size_t>(m)];
      w_row.push_back(col < 0 ? 0.0 : w.weights(row, col));
    }

    std::vector<double> rule_weights;
    for (int m : local_honest) rule_weights.push_back(agent_view(n, m));
    for (int m : local_byz) rule_weights.push_back(agent_view(n, m));

    const auto honest = sample_honest(gen, static_cast<int>(local_honest.size()), dim);
    ParamVector center = ParamVector::Zero(dim);
    for (std::size_t i = 0; i < honest.size(); ++i) center += w_row[i] * honest[i];
    double spread = 0.0;
    for (const auto& p : honest) spread = std::max(spread, (p - center).norm());

    const auto placement = static_cast<Placement>(t % 3);
    const auto byz = place_byzantine(gen, placement, static_cast<int>(local_byz.size()), honest,
                                     center, spread);
    const auto sample = check_contraction(rule, honest, byz, w_row, 0, rule_weights);
    if (sample.spread == 0.0 && sample.lhs == 0.0) continue;
    ++est.valid_trials;
    est.rho_hat = std::max(est.rho_hat, sample.ratio());
  }
  if (est.valid_trials == 0) {
    throw Error(ErrorCode::NoValidTrial, "every sampled configuration was degenerate");
  }
  return est;
}

}  // namespace brdsgd
