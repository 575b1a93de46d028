#include "brdsgd/attacks.hpp"

#include <cmath>
#include <random>

#include "brdsgd/error.hpp"

namespace brdsgd {
namespace {

ParamVector honest_mean(const AttackContext& ctx) {
  if (ctx.honest_msgs.empty()) {
    throw Error(ErrorCode::InvalidArgument, "attack needs at least one honest message");
  }
  ParamVector mean = ParamVector::Zero(ctx.honest_msgs.front().value.size());
  for (const auto& m : ctx.honest_msgs) {
    if (m.value.size() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "honest message");
    mean += m.value;
  }
  return mean / static_cast<double>(ctx.honest_msgs.size());
}

}  // namespace

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::Gaussian: return "gaussian";
    case AttackKind::Duplicate: return "duplicate";
    case AttackKind::Alie: return "alie";
    case AttackKind::SignFlip: return "signflip";
  }
  return "unknown";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none") return AttackKind::None;
  if (name == "gaussian") return AttackKind::Gaussian;
  if (name == "duplicate") return AttackKind::Duplicate;
  if (name == "alie") return AttackKind::Alie;
  if (name == "signflip" || name == "sign_flip") return AttackKind::SignFlip;
  throw Error(ErrorCode::InvalidArgument, "unknown attack '" + name + "'");
}

ParamVector gaussian_attack(const AttackContext& ctx, double stddev) {
  std::mt19937_64 gen(ctx.stream);
  std::normal_distribution<double> normal(0.0, stddev);
  ParamVector out(ctx.dim);
  for (int i = 0; i < ctx.dim; ++i) out[i] = normal(gen);
  return out;
}

ParamVector duplicate_attack(const AttackContext& ctx, int victim) {
  for (const auto& m : ctx.honest_msgs) {
    if (m.sender == victim) return m.value;
  }
  throw Error(ErrorCode::VictimNotVisible,
              "victim " + std::to_string(victim) + " is not among the visible honest messages");
}

ParamVector alie_attack(const AttackContext& ctx, double r) {
  const ParamVector mean = honest_mean(ctx);
  ParamVector var = ParamVector::Zero(mean.size());
  for (const auto& m : ctx.honest_msgs) var += (m.value - mean).cwiseAbs2();
  var /= static_cast<double>(ctx.honest_msgs.size());
  return mean + r * var.cwiseSqrt();
}

ParamVector sign_flip_attack(const AttackContext& ctx) { return -honest_mean(ctx); }

ParamVector craft_message(const AttackSpec& spec, const AttackContext& ctx, int victim) {
  switch (spec.kind) {
    case AttackKind::Gaussian: return gaussian_attack(ctx, spec.gaussian_std);
    case AttackKind::Duplicate: return duplicate_attack(ctx, victim);
    case AttackKind::Alie: return alie_attack(ctx, spec.r);
    case AttackKind::SignFlip: return sign_flip_attack(ctx);
    case AttackKind::None: break;
  }
  throw Error(ErrorCode::InvalidArgument, "attack kind 'none' crafts no message");
}

}  // namespace brdsgd
