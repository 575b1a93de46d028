#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "brdsgd/aggregation.hpp"

namespace brdsgd {

struct Sample {
  Eigen::VectorXd features;
  int label = 0;
};

// Immutable-after-construction list of labelled samples sharing a feature
// dimension.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Sample> samples, int classes);

  int size() const { return static_cast<int>(samples_.size()); }
  bool empty() const { return samples_.empty(); }
  int dim() const { return dim_; }
  int classes() const { return classes_; }
  const Sample& operator[](int i) const { return samples_.at(static_cast<std::size_t>(i)); }
  const std::vector<Sample>& samples() const { return samples_; }

  Dataset with_replaced(int index, Sample replacement) const;
  Dataset head(int count) const;

 private:
  std::vector<Sample> samples_;
  int dim_ = 0;
  int classes_ = 0;
};

enum class LossKind { SoftmaxL2, Softmax, Mlp };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

// Parameter layout (row-major blocks, concatenated):
//   softmax kinds: W (classes x features), b (classes)
//   mlp:           W1 (hidden x features), b1 (hidden), W2 (classes x hidden), b2 (classes)
// The l2 term (lambda/2)||x||^2 covers every parameter, so mu = lambda.
struct LossSpec {
  LossKind kind = LossKind::Softmax;
  int features = 0;
  int classes = 2;
  int hidden = 16;
  double lambda = 0.0;

  int param_count() const;
  double mu() const { return kind == LossKind::SoftmaxL2 ? lambda : 0.0; }
};

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

LossGrad loss_and_grad(const LossSpec& spec, const ParamVector& x, const Sample& sample);
double loss_value(const LossSpec& spec, const ParamVector& x, const Sample& sample);
int predict(const LossSpec& spec, const ParamVector& x, const Eigen::VectorXd& features);

ParamVector batch_grad(const LossSpec& spec, const ParamVector& x, std::span<const Sample> batch);
ParamVector batch_grad(const LossSpec& spec, const ParamVector& x, const Dataset& data,
                       std::span<const int> indices);

double mean_loss(const LossSpec& spec, const ParamVector& x, const Dataset& data);
double accuracy(const LossSpec& spec, const ParamVector& x, const Dataset& data);

enum class ScheduleKind { StronglyConvex, Convex, NonConvex, PaperExp };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

// sc: 1/(mu(k+k0)); cvx: 1/(k+k0); ncvx: a/(L(k+k0)); paper_exp: s/(0.01k+1)
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::PaperExp;
  double k0 = 1.0;
  double a = 1.0;
  double s = 1.0;
  double mu = 1.0;
  double L = 1.0;
};

double step_size(const StepSchedule& s, std::int64_t k);

// Gaussian-mixture classification population: one spherical component per
// class, means at distance `separation` scale, unit-variance noise times
// `noise`.
struct SynthSpec {
  int classes = 2;
  int dim = 20;
  int Z = 200;
  int honest_count = 8;
  int test_count = 2000;
  double separation = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 1;
};

struct SynthData {
  std::vector<Dataset> local;  // one per honest agent, each of size Z
  Dataset test;
  SynthSpec spec;
};

SynthData synth_dataset(const SynthSpec& spec);
// A fresh draw from the same population, independent of the training and test sets.
Sample synth_sample(const SynthSpec& spec, std::uint64_t stream);

// Reads an IDX image/label pair. Features are scaled to [0,1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Splits `data` evenly across `agents` after a seeded shuffle; leftovers are dropped.
std::vector<Dataset> allocate_evenly(const Dataset& data, int agents, int per_agent,
                                     std::uint64_t seed);

struct SmoothnessEstimate {
  double M = 0.0;
  double L = 0.0;
};

// Empirical lower bounds on the gradient-norm bound M and smoothness L from
// `probes` random points in a ball of radius `radius`.
SmoothnessEstimate estimate_M_L(const LossSpec& spec, const Dataset& data, int probes,
                                std::uint64_t seed, double radius = 1.0);

}  // namespace brdsgd
