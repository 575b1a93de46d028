#include "brdsgd/learner.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "brdsgd/error.hpp"
#include "brdsgd/random.hpp"

namespace brdsgd {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstBlock = Eigen::Map<const RowMajor>;
using Block = Eigen::Map<RowMajor>;

void check_params(const LossSpec& spec, const ParamVector& x) {
  if (x.size() != spec.param_count()) {
    throw Error(ErrorCode::DimensionMismatch, "model has " + std::to_string(x.size()) +
                                                  " parameters, loss expects " +
                                                  std::to_string(spec.param_count()));
  }
}

void check_sample(const LossSpec& spec, const Sample& s) {
  if (s.features.size() != spec.features) {
    throw Error(ErrorCode::DimensionMismatch, "sample has " + std::to_string(s.features.size()) +
                                                  " features, loss expects " +
                                                  std::to_string(spec.features));
  }
  if (s.label < 0 || s.label >= spec.classes) {
    throw Error(ErrorCode::InvalidArgument, "label out of range");
  }
}

// Cross-entropy of softmax(z) at `label`; writes p - e_label into dz.
double cross_entropy(const Eigen::VectorXd& z, int label, Eigen::VectorXd& dz) {
  const double zmax = z.maxCoeff();
  dz = (z.array() - zmax).exp();
  const double total = dz.sum();
  dz /= total;
  const double loss = std::log(total) + zmax - z[label];
  dz[label] -= 1.0;
  return loss;
}

struct MlpView {
  ConstBlock w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  ConstBlock w2;
  Eigen::Map<const Eigen::VectorXd> b2;
};

MlpView mlp_view(const LossSpec& s, const ParamVector& x) {
  const double* p = x.data();
  const int h = s.hidden;
  const int d = s.features;
  const int c = s.classes;
  return {ConstBlock(p, h, d), Eigen::Map<const Eigen::VectorXd>(p + h * d, h),
          ConstBlock(p + h * d + h, c, h), Eigen::Map<const Eigen::VectorXd>(p + h * d + h + c * h, c)};
}

double forward_backward(const LossSpec& spec, const ParamVector& x, const Sample& sample,
                        ParamVector* grad) {
  check_params(spec, x);
  check_sample(spec, sample);
  const int d = spec.features;
  const int c = spec.classes;
  double loss = 0.0;
  Eigen::VectorXd dz;
  if (spec.kind == LossKind::Mlp) {
    const int h = spec.hidden;
    const auto v = mlp_view(spec, x);
    const Eigen::VectorXd hid = (v.w1 * sample.features + v.b1).array().tanh().matrix();
    const Eigen::VectorXd z = v.w2 * hid + v.b2;
    loss = cross_entropy(z, sample.label, dz);
    if (grad) {
      grad->setZero(x.size());
      double* g = grad->data();
      const Eigen::VectorXd dh = v.w2.transpose() * dz;
      const Eigen::VectorXd da = dh.array() * (1.0 - hid.array().square());
      Block(g, h, d) = da * sample.features.transpose();
      Eigen::Map<Eigen::VectorXd>(g + h * d, h) = da;
      Block(g + h * d + h, c, h) = dz * hid.transpose();
      Eigen::Map<Eigen::VectorXd>(g + h * d + h + c * h, c) = dz;
    }
  } else {
    const ConstBlock w(x.data(), c, d);
    const Eigen::Map<const Eigen::VectorXd> b(x.data() + c * d, c);
    const Eigen::VectorXd z = w * sample.features + b;
    loss = cross_entropy(z, sample.label, dz);
    if (grad) {
      grad->resize(x.size());
      Block(grad->data(), c, d) = dz * sample.features.transpose();
      Eigen::Map<Eigen::VectorXd>(grad->data() + c * d, c) = dz;
    }
  }
  const double lambda = spec.kind == LossKind::Softmax ? 0.0 : spec.lambda;
  if (lambda != 0.0) {
    loss += 0.5 * lambda * x.squaredNorm();
    if (grad) *grad += lambda * x;
  }
  return loss;
}

}  // namespace

Dataset::Dataset(std::vector<Sample> samples, int classes)
    : samples_(std::move(samples)), classes_(classes) {
  if (!samples_.empty()) dim_ = static_cast<int>(samples_.front().features.size());
  for (const auto& s : samples_) {
    if (s.features.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "ragged dataset");
    if (s.label < 0 || s.label >= classes_) {
      throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(s.label) + " out of range");
    }
  }
}

Dataset Dataset::with_replaced(int index, Sample replacement) const {
  if (index < 0 || index >= size()) throw Error(ErrorCode::InvalidArgument, "sample index out of range");
  auto copy = samples_;
  copy[static_cast<std::size_t>(index)] = std::move(replacement);
  return Dataset(std::move(copy), classes_);
}

Dataset Dataset::head(int count) const {
  count = std::clamp(count, 0, size());
  return Dataset(std::vector<Sample>(samples_.begin(), samples_.begin() + count), classes_);
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::SoftmaxL2: return "softmax_l2";
    case LossKind::Softmax: return "softmax";
    case LossKind::Mlp: return "mlp";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "softmax_l2" || name == "strongly_convex") return LossKind::SoftmaxL2;
  if (name == "softmax" || name == "convex") return LossKind::Softmax;
  if (name == "mlp" || name == "nonconvex") return LossKind::Mlp;
  throw Error(ErrorCode::InvalidArgument, "unknown loss '" + name + "'");
}

int LossSpec::param_count() const {
  if (kind == LossKind::Mlp) return hidden * features + hidden + classes * hidden + classes;
  return classes * features + classes;
}

LossGrad loss_and_grad(const LossSpec& spec, const ParamVector& x, const Sample& sample) {
  LossGrad out;
  out.loss = forward_backward(spec, x, sample, &out.grad);
  return out;
}

double loss_value(const LossSpec& spec, const ParamVector& x, const Sample& sample) {
  return forward_backward(spec, x, sample, nullptr);
}

int predict(const LossSpec& spec, const ParamVector& x, const Eigen::VectorXd& features) {
  check_params(spec, x);
  Eigen::VectorXd z;
  if (spec.kind == LossKind::Mlp) {
    const auto v = mlp_view(spec, x);
    z = v.w2 * (v.w1 * features + v.b1).array().tanh().matrix() + v.b2;
  } else {
    const ConstBlock w(x.data(), spec.classes, spec.features);
    z = w * features + Eigen::Map<const Eigen::VectorXd>(x.data() + spec.classes * spec.features,
                                                         spec.classes);
  }
  Eigen::Index arg = 0;
  z.maxCoeff(&arg);
  return static_cast<int>(arg);
}

ParamVector batch_grad(const LossSpec& spec, const ParamVector& x, std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  ParamVector acc = ParamVector::Zero(x.size());
  ParamVector g;
  for (const auto& s : batch) {
    forward_backward(spec, x, s, &g);
    acc += g;
  }
  return acc / static_cast<double>(batch.size());
}

ParamVector batch_grad(const LossSpec& spec, const ParamVector& x, const Dataset& data,
                       std::span<const int> indices) {
  if (indices.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  ParamVector acc = ParamVector::Zero(x.size());
  ParamVector g;
  for (int i : indices) {
    forward_backward(spec, x, data[i], &g);
    acc += g;
  }
  return acc / static_cast<double>(indices.size());
}

double mean_loss(const LossSpec& spec, const ParamVector& x, const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  double total = 0.0;
  for (const auto& s : data.samples()) total += forward_backward(spec, x, s, nullptr);
  return total / data.size();
}

double accuracy(const LossSpec& spec, const ParamVector& x, const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  int hits = 0;
  for (const auto& s : data.samples()) hits += predict(spec, x, s.features) == s.label ? 1 : 0;
  return static_cast<double>(hits) / data.size();
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::StronglyConvex: return "sc";
    case ScheduleKind::Convex: return "cvx";
    case ScheduleKind::NonConvex: return "ncvx";
    case ScheduleKind::PaperExp: return "paper_exp";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "sc") return ScheduleKind::StronglyConvex;
  if (name == "cvx") return ScheduleKind::Convex;
  if (name == "ncvx") return ScheduleKind::NonConvex;
  if (name == "paper_exp") return ScheduleKind::PaperExp;
  throw Error(ErrorCode::InvalidArgument, "unknown step schedule '" + name + "'");
}

double step_size(const StepSchedule& s, std::int64_t k) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "negative step index");
  const double t = static_cast<double>(k) + s.k0;
  switch (s.kind) {
    case ScheduleKind::StronglyConvex: return 1.0 / (s.mu * t);
    case ScheduleKind::Convex: return 1.0 / t;
    case ScheduleKind::NonConvex: return s.a / (s.L * t);
    case ScheduleKind::PaperExp: return s.s / (0.01 * static_cast<double>(k) + 1.0);
  }
  return 0.0;
}

namespace {

std::vector<Eigen::VectorXd> class_means(const SynthSpec& spec) {
  auto gen = make_stream(spec.seed, StreamPurpose::Data, {0});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> means;
  for (int c = 0; c < spec.classes; ++c) {
    Eigen::VectorXd m(spec.dim);
    for (int i = 0; i < spec.dim; ++i) m[i] = normal(gen);
    means.push_back(spec.separation * m.normalized());
  }
  return means;
}

Sample draw(const SynthSpec& spec, const std::vector<Eigen::VectorXd>& means, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> label(0, spec.classes - 1);
  std::normal_distribution<double> normal(0.0, spec.noise);
  Sample s;
  s.label = label(gen);
  s.features = means[static_cast<std::size_t>(s.label)];
  for (int i = 0; i < spec.dim; ++i) s.features[i] += normal(gen);
  return s;
}

}  // namespace

SynthData synth_dataset(const SynthSpec& spec) {
  if (spec.classes < 1 || spec.dim < 1 || spec.Z < 1 || spec.honest_count < 1 || spec.test_count < 1) {
    throw Error(ErrorCode::InvalidArgument, "synthetic dataset counts must be positive");
  }
  const auto means = class_means(spec);
  auto train_gen = make_stream(spec.seed, StreamPurpose::Data, {1});
  std::vector<Sample> pool;
  pool.reserve(static_cast<std::size_t>(spec.Z) * static_cast<std::size_t>(spec.honest_count));
  for (int i = 0; i < spec.Z * spec.honest_count; ++i) pool.push_back(draw(spec, means, train_gen));

  SynthData out;
  out.spec = spec;
  out.local = allocate_evenly(Dataset(std::move(pool), spec.classes), spec.honest_count, spec.Z,
                              spec.seed);
  auto test_gen = make_stream(spec.seed, StreamPurpose::Data, {2});
  std::vector<Sample> test;
  for (int i = 0; i < spec.test_count; ++i) test.push_back(draw(spec, means, test_gen));
  out.test = Dataset(std::move(test), spec.classes);
  return out;
}

Sample synth_sample(const SynthSpec& spec, std::uint64_t stream) {
  const auto means = class_means(spec);
  auto gen = make_stream(spec.seed, StreamPurpose::Data, {3, stream});
  return draw(spec, means, gen);
}

std::vector<Dataset> allocate_evenly(const Dataset& data, int agents, int per_agent,
                                     std::uint64_t seed) {
  if (agents < 1 || per_agent < 1) throw Error(ErrorCode::InvalidArgument, "allocation counts");
  if (static_cast<long long>(agents) * per_agent > data.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "dataset of " + std::to_string(data.size()) + " samples cannot give " +
                    std::to_string(per_agent) + " to each of " + std::to_string(agents) + " agents");
  }
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  auto gen = make_stream(seed, StreamPurpose::Data, {4});
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<Dataset> out;
  for (int a = 0; a < agents; ++a) {
    std::vector<Sample> part;
    for (int j = 0; j < per_agent; ++j) {
      part.push_back(data[order[static_cast<std::size_t>(a * per_agent + j)]]);
    }
    out.emplace_back(std::move(part), data.classes());
  }
  return out;
}

SmoothnessEstimate estimate_M_L(const LossSpec& spec, const Dataset& data, int probes,
                                std::uint64_t seed, double radius) {
  if (probes < 1) throw Error(ErrorCode::InvalidArgument, "probes must be >= 1");
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  const int p = spec.param_count();
  SmoothnessEstimate est;
  ParamVector gx;
  ParamVector gy;
  for (int t = 0; t < probes; ++t) {
    auto gen = make_stream(seed, StreamPurpose::Probe, {static_cast<std::uint64_t>(t)});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ParamVector dir(p);
    for (int i = 0; i < p; ++i) dir[i] = normal(gen);
    const ParamVector x = dir.normalized() * radius * std::pow(unit(gen), 1.0 / p);
    ParamVector step(p);
    for (int i = 0; i < p; ++i) step[i] = normal(gen);
    const ParamVector y = x + step.normalized() * 1e-4 * std::max(radius, 1.0);
    const double gap = (x - y).norm();
    for (const auto& s : data.samples()) {
      forward_backward(spec, x, s, &gx);
      forward_backward(spec, y, s, &gy);
      est.M = std::max(est.M, gx.norm());
      est.L = std::max(est.L, (gx - gy).norm() / gap);
    }
  }
  return est;
}

}  // namespace brdsgd
