#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace brdsgd {

using ParamVector = Eigen::VectorXd;

struct Message {
  int sender = 0;
  ParamVector value;
};

// What one honest agent sees in the aggregation step: its own half-step model
// and every message received from neighbors. When present, `weights` holds
// the own weight first, then one weight per message in list order.
struct InboundSet {
  int own_id = -1;
  ParamVector own;
  std::vector<Message> messages;
  std::optional<std::vector<double>> weights;

  // Uniform weights 1/(messages + 1) over own and all messages.
  static InboundSet uniform(int own_id, ParamVector own, std::vector<Message> messages);

  int dim() const { return static_cast<int>(own.size()); }
  int input_count() const { return static_cast<int>(messages.size()) + 1; }
};

enum class RuleKind { WeightedMean, TrimmedMean, Ios, Scc };

struct RuleSpec {
  RuleKind kind = RuleKind::WeightedMean;
  // Trim count b for TM, removal count q for IOS. kLocal sizes it per agent to
  // the number of Byzantine neighbors; the engine resolves it.
  int count = 0;
  static constexpr int kLocal = -1;
  double tau = std::numeric_limits<double>::infinity();  // SCC radius

  static RuleSpec weighted_mean() { return {}; }
  static RuleSpec trimmed_mean(int b) { return {RuleKind::TrimmedMean, b}; }
  static RuleSpec ios(int q) { return {RuleKind::Ios, q}; }
  static RuleSpec scc(double tau) { return {RuleKind::Scc, 0, tau}; }

  bool local() const { return count == kLocal; }
  // Copy with a local count replaced by `byzantine_neighbors`.
  RuleSpec sized_for(int byzantine_neighbors) const;

  std::string name() const;
};

std::string to_string(RuleKind kind);
RuleKind parse_rule_kind(const std::string& name);

ParamVector weighted_mean(const InboundSet& in);
ParamVector trimmed_mean(const InboundSet& in, int b);
ParamVector ios(const InboundSet& in, int q);
ParamVector scc(const InboundSet& in, double tau);

ParamVector aggregate(const RuleSpec& rule, const InboundSet& in);

struct ContractionSample {
  double lhs = 0.0;
  double spread = 0.0;

  // lhs / spread; 0/0 is reported as 0 and x/0 with x > 0 as +inf.
  double ratio() const;
};

// Evaluates both sides of the contraction inequality for one configuration.
// `honest` holds the aggregating agent (at `own_index`) and its honest
// neighbors; `w_row` is the virtual mixing row over `honest`. The rule sees
// the own point plus all other points as messages, with `rule_weights`
// (own, other honest in order, then Byzantine) or uniform weights if absent.
ContractionSample check_contraction(const RuleSpec& rule, std::span<const ParamVector> honest,
                                    std::span<const ParamVector> byzantine,
                                    std::span<const double> w_row, int own_index = 0,
                                    const std::optional<std::vector<double>>& rule_weights = {});

}  // namespace brdsgd
