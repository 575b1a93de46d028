#include "brdsgd/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brdsgd/error.hpp"

namespace brdsgd {
namespace {

constexpr double kWeightTolerance = 1e-9;

struct Input {
  int id;
  const ParamVector* value;
  double weight;
  bool own;
};

void check_dims(const InboundSet& in) {
  const auto d = in.own.size();
  for (const auto& m : in.messages) {
    if (m.value.size() != d) {
      throw Error(ErrorCode::DimensionMismatch,
                  "message from " + std::to_string(m.sender) + " has dimension " +
                      std::to_string(m.value.size()) + ", expected " + std::to_string(d));
    }
  }
}

const std::vector<double>& checked_weights(const InboundSet& in) {
  if (!in.weights) throw Error(ErrorCode::InvalidWeights, "rule requires weights");
  const auto& w = *in.weights;
  if (w.size() != in.messages.size() + 1) {
    throw Error(ErrorCode::InvalidWeights, "expected " + std::to_string(in.messages.size() + 1) +
                                               " weights, got " + std::to_string(w.size()));
  }
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorCode::InvalidWeights, "weights must be finite and nonnegative");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw Error(ErrorCode::InvalidWeights, "weights sum to " + std::to_string(total));
  }
  return w;
}

// Inputs ordered by sender id with own at its id, so that two agents holding
// the same multiset of (id, vector, weight) produce bit-identical sums.
std::vector<Input> ordered_inputs(const InboundSet& in, const std::vector<double>* w) {
  std::vector<Input> out;
  out.reserve(in.messages.size() + 1);
  out.push_back({in.own_id, &in.own, w ? (*w)[0] : 0.0, true});
  for (std::size_t i = 0; i < in.messages.size(); ++i) {
    out.push_back({in.messages[i].sender, &in.messages[i].value, w ? (*w)[i + 1] : 0.0, false});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Input& a, const Input& b) { return a.id < b.id; });
  return out;
}

ParamVector renormalized_mean(const std::vector<Input>& inputs, const std::vector<bool>& keep,
                              Eigen::Index dim) {
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (keep[i]) total += inputs[i].weight;
  }
  ParamVector acc = ParamVector::Zero(dim);
  if (total <= 0.0) {
    // All surviving weight is zero; fall back to the unweighted mean.
    double count = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (keep[i]) {
        acc += *inputs[i].value;
        count += 1.0;
      }
    }
    return acc / count;
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (keep[i]) acc += (inputs[i].weight / total) * *inputs[i].value;
  }
  return acc;
}

}  // namespace

InboundSet InboundSet::uniform(int own_id, ParamVector own, std::vector<Message> messages) {
  InboundSet in;
  in.own_id = own_id;
  in.own = std::move(own);
  in.messages = std::move(messages);
  in.weights = std::vector<double>(in.messages.size() + 1,
                                   1.0 / static_cast<double>(in.messages.size() + 1));
  return in;
}

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::WeightedMean: return "mean";
    case RuleKind::TrimmedMean: return "tm";
    case RuleKind::Ios: return "ios";
    case RuleKind::Scc: return "scc";
  }
  return "unknown";
}

RuleKind parse_rule_kind(const std::string& name) {
  if (name == "mean" || name == "weighted_mean") return RuleKind::WeightedMean;
  if (name == "tm" || name == "trimmed_mean") return RuleKind::TrimmedMean;
  if (name == "ios") return RuleKind::Ios;
  if (name == "scc") return RuleKind::Scc;
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation rule '" + name + "'");
}

std::string RuleSpec::name() const {
  switch (kind) {
    case RuleKind::WeightedMean: return "mean";
    case RuleKind::TrimmedMean: return "tm(b=" + (local() ? std::string("local") : std::to_string(count)) + ")";
    case RuleKind::Ios: return "ios(q=" + (local() ? std::string("local") : std::to_string(count)) + ")";
    case RuleKind::Scc: return "scc(tau=" + std::to_string(tau) + ")";
  }
  return "unknown";
}

ParamVector weighted_mean(const InboundSet& in) {
  check_dims(in);
  const auto& w = checked_weights(in);
  const auto inputs = ordered_inputs(in, &w);
  ParamVector acc = ParamVector::Zero(in.own.size());
  for (const auto& x : inputs) acc += x.weight * *x.value;
  return acc;
}

ParamVector trimmed_mean(const InboundSet& in, int b) {
  check_dims(in);
  if (b < 0) throw Error(ErrorCode::InvalidArgument, "trim count must be nonnegative");
  const int count = in.input_count();
  if (count <= 2 * b) {
    throw Error(ErrorCode::TooFewInputs, std::to_string(count) + " inputs cannot be trimmed by " +
                                             std::to_string(b) + " on each side");
  }
  const auto d = in.own.size();
  ParamVector out(d);
  std::vector<double> column(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < d; ++i) {
    column[0] = in.own[i];
    for (std::size_t m = 0; m < in.messages.size(); ++m) column[m + 1] = in.messages[m].value[i];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (int j = b; j < count - b; ++j) sum += column[static_cast<std::size_t>(j)];
    out[i] = sum / static_cast<double>(count - 2 * b);
  }
  return out;
}

ParamVector ios(const InboundSet& in, int q) {
  check_dims(in);
  const auto& w = checked_weights(in);
  if (q < 0) throw Error(ErrorCode::InvalidArgument, "removal count must be nonnegative");
  if (q > 0 && q >= static_cast<int>(in.messages.size())) {
    throw Error(ErrorCode::TooFewInputs, "cannot remove " + std::to_string(q) + " of " +
                                             std::to_string(in.messages.size()) + " messages");
  }
  const auto inputs = ordered_inputs(in, &w);
  std::vector<bool> keep(inputs.size(), true);
  for (int round = 0; round < q; ++round) {
    const ParamVector avg = renormalized_mean(inputs, keep, in.own.size());
    int worst = -1;
    double worst_dist = -1.0;
    // Inputs are in ascending sender order, so strict '>' keeps the lowest id on ties.
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!keep[i] || inputs[i].own) continue;
      const double dist = (*inputs[i].value - avg).norm();
      if (dist > worst_dist) {
        worst_dist = dist;
        worst = static_cast<int>(i);
      }
    }
    keep[static_cast<std::size_t>(worst)] = false;
  }
  return renormalized_mean(inputs, keep, in.own.size());
}

ParamVector scc(const InboundSet& in, double tau) {
  check_dims(in);
  const auto& w = checked_weights(in);
  if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "clipping radius must be >= 0");
  const auto inputs = ordered_inputs(in, &w);
  ParamVector acc = ParamVector::Zero(in.own.size());
  for (const auto& x : inputs) {
    if (x.own) {
      acc += x.weight * in.own;
      continue;
    }
    const ParamVector diff = *x.value - in.own;
    const double dist = diff.norm();
    if (dist == 0.0 || dist <= tau) {
      acc += x.weight * *x.value;
    } else {
      acc += x.weight * (in.own + diff * (tau / dist));
    }
  }
  return acc;
}

RuleSpec RuleSpec::sized_for(int byzantine_neighbors) const {
  RuleSpec out = *this;
  if (local()) out.count = kind == RuleKind::WeightedMean || kind == RuleKind::Scc ? 0 : byzantine_neighbors;
  return out;
}

ParamVector aggregate(const RuleSpec& rule, const InboundSet& in) {
  if (rule.local()) throw Error(ErrorCode::InvalidArgument, "rule count must be resolved before aggregating");
  switch (rule.kind) {
    case RuleKind::WeightedMean: return weighted_mean(in);
    case RuleKind::TrimmedMean: return trimmed_mean(in, rule.count);
    case RuleKind::Ios: return ios(in, rule.count);
    case RuleKind::Scc: return scc(in, rule.tau);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown rule");
}

double ContractionSample::ratio() const {
  if (spread == 0.0) return lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return lhs / spread;
}

ContractionSample check_contraction(const RuleSpec& rule, std::span<const ParamVector> honest,
                                    std::span<const ParamVector> byzantine,
                                    std::span<const double> w_row, int own_index,
                                    const std::optional<std::vector<double>>& rule_weights) {
  if (honest.empty()) throw Error(ErrorCode::InvalidArgument, "no honest points");
  if (w_row.size() != honest.size()) {
    throw Error(ErrorCode::InvalidWeights, "virtual row must have one weight per honest point");
  }
  if (own_index < 0 || own_index >= static_cast<int>(honest.size())) {
    throw Error(ErrorCode::InvalidArgument, "own index out of range");
  }
  const auto d = honest.front().size();
  for (const auto& p : honest) {
    if (p.size() != d) throw Error(ErrorCode::DimensionMismatch, "honest point dimension");
  }
  for (const auto& p : byzantine) {
    if (p.size() != d) throw Error(ErrorCode::DimensionMismatch, "byzantine point dimension");
  }

  ParamVector center = ParamVector::Zero(d);
  for (std::size_t i = 0; i < honest.size(); ++i) center += w_row[i] * honest[i];

  InboundSet in;
  in.own_id = own_index;
  in.own = honest[static_cast<std::size_t>(own_index)];
  for (std::size_t i = 0; i < honest.size(); ++i) {
    if (static_cast<int>(i) == own_index) continue;
    in.messages.push_back({static_cast<int>(i), honest[i]});
  }
  for (std::size_t j = 0; j < byzantine.size(); ++j) {
    in.messages.push_back({static_cast<int>(honest.size() + j), byzantine[j]});
  }
  if (rule_weights) {
    in.weights = rule_weights;
  } else {
    in.weights = std::vector<double>(in.messages.size() + 1,
                                     1.0 / static_cast<double>(in.messages.size() + 1));
  }

  ContractionSample out;
  out.lhs = (aggregate(rule.sized_for(static_cast<int>(byzantine.size())), in) - center).norm();
  for (const auto& p : honest) out.spread = std::max(out.spread, (p - center).norm());
  return out;
}

}  // namespace brdsgd
