#pragma once

// Straight-line reference implementations used as test oracles. They share no
// code with the library and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace oracle {

using Vec = Eigen::VectorXd;

// points[0] is own; weights aligned with points.
inline Vec weighted_sum(const std::vector<Vec>& points, const std::vector<double>& weights) {
  Vec out = Vec::Zero(points[0].size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int c = 0; c < out.size(); ++c) out[c] += weights[i] * points[i][c];
  }
  return out;
}

inline Vec trimmed_mean(const std::vector<Vec>& points, int b) {
  const int d = static_cast<int>(points[0].size());
  Vec out(d);
  for (int c = 0; c < d; ++c) {
    std::vector<double> col;
    for (const auto& p : points) col.push_back(p[c]);
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(b); i + static_cast<std::size_t>(b) < col.size(); ++i) s += col[i];
    out[c] = s / static_cast<double>(col.size() - 2 * static_cast<std::size_t>(b));
  }
  return out;
}

// Removes q non-own points one at a time, farthest from the renormalized
// weighted average of the survivors; ties go to the lower index.
inline Vec ios(const std::vector<Vec>& points, const std::vector<double>& weights, int q) {
  std::vector<bool> alive(points.size(), true);
  auto mean = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) if (alive[i]) total += weights[i];
    Vec m = Vec::Zero(points[0].size());
    for (std::size_t i = 0; i < points.size(); ++i) if (alive[i]) m += (weights[i] / total) * points[i];
    return m;
  };
  for (int r = 0; r < q; ++r) {
    const Vec m = mean();
    double worst = -1.0;
    std::size_t at = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (!alive[i]) continue;
      const double dist = (points[i] - m).norm();
      if (dist > worst) {
        worst = dist;
        at = i;
      }
    }
    alive[at] = false;
  }
  return mean();
}

inline Vec scc(const std::vector<Vec>& points, const std::vector<double>& weights, double tau) {
  std::vector<Vec> clipped{points[0]};
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec diff = points[i] - points[0];
    const double dist = diff.norm();
    clipped.push_back(dist <= tau || dist == 0.0 ? points[i] : Vec(points[0] + diff * (tau / dist)));
  }
  return weighted_sum(clipped, weights);
}

// 1 - sigma_max((I - 11^T/n) W)^2 via a full SVD.
inline double beta(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centering * w);
  const double s = svd.singularValues()(0);
  return 1.0 - s * s;
}

inline double chi(const Eigen::MatrixXd& w) {
  double s = 0.0;
  for (int j = 0; j < w.cols(); ++j) {
    double col = 0.0;
    for (int i = 0; i < w.rows(); ++i) col += w(i, j);
    s += (col - 1.0) * (col - 1.0);
  }
  return std::sqrt(s / static_cast<double>(w.rows()));
}

// Metropolis-Hastings weights from an adjacency matrix.
inline Eigen::MatrixXd metropolis(const std::vector<std::vector<int>>& adj) {
  const auto n = adj.size();
  std::vector<int> deg(n, 0);
  for (std::size_t i = 0; i < n; ++i) for (std::size_t j = 0; j < n; ++j) deg[i] += adj[i][j];
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !adj[i][j]) continue;
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 / (1.0 + std::max(deg[i], deg[j]));
      off += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 - off;
  }
  return w;
}

// Central differences of f at x, step h per coordinate.
inline Vec numeric_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec a = x;
    Vec b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |b_i|)
inline double rel_error(const Vec& a, const Vec& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  }
  return worst;
}

// Plain softmax cross-entropy with l2 term, written out by hand. Layout: W
// (classes x features, row-major) then bias.
inline double softmax_loss(const Vec& x, const Vec& feat, int label, int classes, double lambda) {
  const int d = static_cast<int>(feat.size());
  std::vector<double> z(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    double s = x[classes * d + c];
    for (int j = 0; j < d; ++j) s += x[c * d + j] * feat[j];
    z[static_cast<std::size_t>(c)] = s;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double v : z) denom += std::exp(v - zmax);
  return -(z[static_cast<std::size_t>(label)] - zmax - std::log(denom)) + 0.5 * lambda * x.squaredNorm();
}

}  // namespace oracle
