#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "brdsgd/error.hpp"
#include "brdsgd/learner.hpp"
#include "../oracles.hpp"

using namespace brdsgd;

namespace {

Sample random_sample(std::mt19937_64& gen, int dim, int classes) {
  std::normal_distribution<double> n;
  Sample s;
  s.features = Eigen::VectorXd::NullaryExpr(dim, [&] { return n(gen); });
  s.label = std::uniform_int_distribution<int>(0, classes - 1)(gen);
  return s;
}

ParamVector random_params(std::mt19937_64& gen, int p, double scale = 0.5) {
  std::normal_distribution<double> n(0.0, scale);
  return ParamVector::NullaryExpr(p, [&] { return n(gen); });
}

void put_be32(std::ofstream& f, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  f.write(b, 4);
}

}  // namespace

TEST_CASE("regularized softmax at zero gives ln C") {
  std::mt19937_64 gen(1);
  for (int classes : {2, 3, 10}) {
    const LossSpec spec{LossKind::SoftmaxL2, 5, classes, 16, 1.0};
    const auto s = random_sample(gen, 5, classes);
    const auto lg = loss_and_grad(spec, ParamVector::Zero(spec.param_count()), s);
    CHECK(lg.loss == doctest::Approx(std::log(classes)).epsilon(1e-14));
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 gen(2);
  for (auto kind : {LossKind::SoftmaxL2, LossKind::Softmax, LossKind::Mlp}) {
    const LossSpec spec{kind, 6, 3, 5, 0.3};
    for (int t = 0; t < 10; ++t) {
      const auto s = random_sample(gen, 6, 3);
      const ParamVector x = random_params(gen, spec.param_count());
      const auto lg = loss_and_grad(spec, x, s);
      const auto num = oracle::numeric_grad([&](const oracle::Vec& v) { return loss_value(spec, v, s); }, x);
      CHECK(oracle::rel_error(lg.grad, num) < 1e-5);
      CHECK(lg.loss == doctest::Approx(loss_value(spec, x, s)).epsilon(1e-14));
    }
  }
}

TEST_CASE("softmax loss matches a hand-written oracle") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) {
    const LossSpec spec{LossKind::SoftmaxL2, 4, 3, 16, 0.2};
    const auto s = random_sample(gen, 4, 3);
    const ParamVector x = random_params(gen, spec.param_count());
    CHECK(loss_value(spec, x, s) == doctest::Approx(oracle::softmax_loss(x, s.features, s.label, 3, 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("zero lambda makes the two softmax kinds agree") {
  std::mt19937_64 gen(4);
  const LossSpec a{LossKind::SoftmaxL2, 4, 3, 16, 0.0};
  const LossSpec b{LossKind::Softmax, 4, 3, 16, 0.0};
  const auto s = random_sample(gen, 4, 3);
  const ParamVector x = random_params(gen, a.param_count());
  CHECK(loss_value(a, x, s) == loss_value(b, x, s));
  CHECK((loss_and_grad(a, x, s).grad - loss_and_grad(b, x, s).grad).norm() == 0.0);
  CHECK_THROWS_AS(loss_and_grad(a, ParamVector::Zero(3), s), Error);
}

TEST_CASE("strong convexity inequality") {
  std::mt19937_64 gen(5);
  const LossSpec spec{LossKind::SoftmaxL2, 4, 3, 16, 0.5};
  for (int t = 0; t < 100; ++t) {
    const auto s = random_sample(gen, 4, 3);
    const ParamVector x = random_params(gen, spec.param_count(), 2.0);
    const ParamVector y = random_params(gen, spec.param_count(), 2.0);
    const auto fx = loss_and_grad(spec, x, s);
    const double fy = loss_value(spec, y, s);
    CHECK(fy >= fx.loss + fx.grad.dot(y - x) + 0.5 * spec.mu() * (y - x).squaredNorm() - 1e-9);
  }
}

TEST_CASE("batch gradient is the mean of sample gradients") {
  std::mt19937_64 gen(6);
  const LossSpec spec{LossKind::Mlp, 3, 2, 4, 0.0};
  const ParamVector x = random_params(gen, spec.param_count());
  std::vector<Sample> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_sample(gen, 3, 2));
  ParamVector expect = ParamVector::Zero(spec.param_count());
  for (const auto& s : batch) expect += loss_and_grad(spec, x, s).grad / 5.0;
  CHECK((batch_grad(spec, x, batch) - expect).cwiseAbs().maxCoeff() < 1e-12);

  const std::vector<Sample> one{batch[0]};
  CHECK((batch_grad(spec, x, one) - loss_and_grad(spec, x, batch[0]).grad).norm() == 0.0);
  const std::vector<Sample> twice{batch[0], batch[0]};
  CHECK((batch_grad(spec, x, twice) - batch_grad(spec, x, one)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(batch_grad(spec, x, std::span<const Sample>{}), Error);
}

TEST_CASE("step size schedules") {
  StepSchedule s;
  s.kind = ScheduleKind::StronglyConvex;
  s.mu = 1.0;
  s.k0 = 10;
  CHECK(step_size(s, 0) == doctest::Approx(0.1));
  s = {};
  s.kind = ScheduleKind::PaperExp;
  CHECK(step_size(s, 0) == 1.0);
  s.kind = ScheduleKind::NonConvex;
  s.a = 1.0;
  s.L = 2.0;
  s.k0 = 10;
  CHECK(step_size(s, 0) == doctest::Approx(0.05));
  for (auto kind : {ScheduleKind::StronglyConvex, ScheduleKind::Convex, ScheduleKind::NonConvex, ScheduleKind::PaperExp}) {
    s.kind = kind;
    CHECK(parse_schedule_kind(to_string(kind)) == kind);
    for (std::int64_t k = 0; k < 500; ++k) {
      CHECK(step_size(s, k) > 0.0);
      CHECK(step_size(s, k + 1) <= step_size(s, k));
    }
  }
  CHECK_THROWS_AS(step_size(s, -1), Error);
}

TEST_CASE("synthetic data allocation") {
  SynthSpec spec;
  spec.Z = 10;
  spec.honest_count = 3;
  const auto d = synth_dataset(spec);
  CHECK(d.local.size() == 3);
  for (const auto& l : d.local) CHECK(l.size() == 10);
  const auto again = synth_dataset(spec);
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 10; ++i) {
      CHECK((d.local[a][i].features - again.local[a][i].features).norm() == 0.0);
      CHECK(d.local[a][i].label == again.local[a][i].label);
    }
}

TEST_CASE("separable mixture is learnable") {
  SynthSpec spec;
  spec.classes = 2;
  spec.dim = 5;
  spec.Z = 100;
  spec.honest_count = 2;
  spec.separation = 4.0;
  const auto d = synth_dataset(spec);
  const LossSpec loss{LossKind::Softmax, 5, 2, 16, 0.0};
  std::vector<Sample> train = d.local[0].samples();
  train.insert(train.end(), d.local[1].samples().begin(), d.local[1].samples().end());
  ParamVector x = ParamVector::Zero(loss.param_count());
  for (int it = 0; it < 300; ++it) x -= 0.5 * batch_grad(loss, x, train);
  CHECK(accuracy(loss, x, d.test) > 0.95);
}

TEST_CASE("sampling indices look uniform") {
  // chi-square over 1e5 draws from Z=10, 9 dof; critical value at 0.001 is 27.88
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> pick(0, 9);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(pick(gen))];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  CHECK(chi2 < 27.88);
}

TEST_CASE("smoothness estimates") {
  // zero features: the gradient is the bias gradient, norm <= sqrt(2)
  std::vector<Sample> zeros;
  for (int i = 0; i < 4; ++i) zeros.push_back({Eigen::VectorXd::Zero(3), i % 2});
  const Dataset z(zeros, 2);
  const LossSpec soft{LossKind::SoftmaxL2, 3, 2, 16, 0.1};
  const auto est = estimate_M_L(soft, z, 16, 1, 1.0);
  CHECK(est.M <= std::sqrt(2.0) + 0.1 * 1.0 + 1e-12);

  std::vector<Sample> one_class;
  for (int i = 0; i < 4; ++i) one_class.push_back({Eigen::VectorXd::Zero(3), 0});
  const LossSpec flat{LossKind::Softmax, 3, 1, 16, 0.0};
  CHECK(estimate_M_L(flat, Dataset(one_class, 1), 8, 2).L == doctest::Approx(0.0).epsilon(1e-9));

  SynthSpec spec;
  spec.Z = 20;
  spec.honest_count = 1;
  const auto d = synth_dataset(spec);
  const LossSpec loss{LossKind::Softmax, spec.dim, 2, 16, 0.0};
  CHECK(estimate_M_L(loss, d.local[0], 16, 5).M >= estimate_M_L(loss, d.local[0], 8, 5).M);
}

TEST_CASE("idx files") {
  const auto dir = std::filesystem::temp_directory_path() / "brdsgd_unit_idx";
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, std::uint32_t magic, std::vector<std::uint32_t> dims,
                   std::vector<unsigned char> payload) {
    std::ofstream f(dir / name, std::ios::binary);
    put_be32(f, magic);
    for (auto v : dims) put_be32(f, v);
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  };
  std::vector<unsigned char> pixels(4 * 2 * 2, 0);
  pixels[0] = 255;
  write("img", 0x803, {4, 2, 2}, pixels);
  write("lab", 0x801, {4}, {0, 1, 2, 3});
  write("lab3", 0x801, {3}, {0, 1, 2});

  const auto d = load_idx(dir / "img", dir / "lab");
  CHECK(d.size() == 4);
  CHECK(d.dim() == 4);
  CHECK(d[0].features[0] == 1.0);
  CHECK(d[3].label == 3);
  try {
    load_idx(dir / "img", dir / "lab3");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
  try {
    load_idx(dir / "lab", dir / "lab");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadMagic);
  }
  std::filesystem::remove_all(dir);
}
