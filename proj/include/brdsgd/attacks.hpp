#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "brdsgd/aggregation.hpp"

namespace brdsgd {

// The attacker's view when crafting the message for one honest target:
// the half-step messages of the target's honest neighborhood.
struct AttackContext {
  int target = 0;
  std::span<const Message> honest_msgs;
  std::int64_t step = 0;
  int dim = 0;
  std::uint64_t stream = 0;  // seed of this (attacker, step, target) random stream
};

enum class AttackKind { None, Gaussian, Duplicate, Alie, SignFlip };

std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double r = 1.0;               // ALIE scale factor
  double gaussian_std = 30.0;   // variance 900
  std::optional<int> victim;    // duplicate attack; drawn at run start when absent
  bool include_target = false;  // whether the target's own half-step is in the ALIE/sign-flip view
};

ParamVector gaussian_attack(const AttackContext& ctx, double stddev = 30.0);
ParamVector duplicate_attack(const AttackContext& ctx, int victim);
ParamVector alie_attack(const AttackContext& ctx, double r);
ParamVector sign_flip_attack(const AttackContext& ctx);

// Dispatches on spec.kind. `victim` is only read by the duplicate attack.
ParamVector craft_message(const AttackSpec& spec, const AttackContext& ctx, int victim);

}  // namespace brdsgd
