#pragma once

// Reference implementations used as oracles by the unit and acceptance tests.
// They are written directly from the problem definitions with dense matrices and
// share no code with the library beyond its data types.

#include "slicedict/dictionary.hpp"
#include "slicedict/engine.hpp"
#include "slicedict/image.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline slicedict::Image random_image(int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  slicedict::Image x(h, w);
  for (double& v : x.pixels()) v = u(rng);
  return x;
}

inline MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

inline slicedict::LocalDictionary random_dictionary(int n, int m, std::mt19937_64& rng) {
  return slicedict::LocalDictionary::normalized(random_matrix(n, m, rng));
}

// Dense n x (H*W) matrix of the operator taking an image to slice i of its
// (f-1)-padded grid. Slice (r, c) has top-left corner (r - f + 1, c - f + 1) in image
// coordinates.
inline MatrixXd patch_operator(int h, int w, int f, int i) {
  const int cols = w + f - 1;
  const int r0 = i / cols - (f - 1), c0 = i % cols - (f - 1);
  MatrixXd p = MatrixXd::Zero(f * f, h * w);
  for (int a = 0; a < f; ++a) {
    for (int b = 0; b < f; ++b) {
      const int r = r0 + a, c = c0 + b;
      if (r >= 0 && r < h && c >= 0 && c < w) p(a * f + b, r * w + c) = 1.0;
    }
  }
  return p;
}

// [P_1^T ... P_N^T]: (H*W) x (n * N_s), mapping stacked slices to their aggregate.
inline MatrixXd aggregation_operator(int h, int w, int f) {
  const int count = (h + f - 1) * (w + f - 1);
  const int n = f * f;
  MatrixXd a(h * w, n * count);
  for (int i = 0; i < count; ++i) a.middleCols(i * n, n) = patch_operator(h, w, f, i).transpose();
  return a;
}

inline VectorXd stack(const MatrixXd& columns) {
  return Eigen::Map<const VectorXd>(columns.data(), columns.size());
}

inline MatrixXd unstack(const VectorXd& v, int n) {
  return Eigen::Map<const MatrixXd>(v.data(), n, v.size() / n);
}

inline MatrixXd synthesize_dense(const slicedict::SliceField& field, const slicedict::LocalDictionary& d) {
  MatrixXd out(field.geometry.patch_size(), field.slice_count());
  for (int i = 0; i < field.slice_count(); ++i) {
    out.col(i) = d.atoms() * field.needles[i].to_dense(d.atom_count());
  }
  return out;
}

// argmin_s 1/2||mask .* (x - A s)||^2 + rho/2 ||s - (D a - u)||^2 by a dense solve.
inline MatrixXd slice_update_dense(const slicedict::SliceField& field, const slicedict::Image& x,
                                   const slicedict::LocalDictionary& d, double rho,
                                   const slicedict::Image* mask = nullptr) {
  const auto& g = field.geometry;
  const MatrixXd a = aggregation_operator(g.height, g.width, g.filter);
  VectorXd weight = VectorXd::Ones(g.pixel_count());
  if (mask) weight = mask->vec();
  const MatrixXd lhs = a.transpose() * weight.asDiagonal() * a + rho * MatrixXd::Identity(a.cols(), a.cols());
  const VectorXd target = stack(synthesize_dense(field, d) - field.duals);
  const VectorXd rhs = a.transpose() * weight.asDiagonal() * x.vec() + rho * target;
  return unstack(lhs.ldlt().solve(rhs), g.patch_size());
}

inline double lasso_objective(const MatrixXd& d, const VectorXd& b, const VectorXd& a, double lambda) {
  return 0.5 * (b - d * a).squaredNorm() + lambda * a.lpNorm<1>();
}

// Exact LASSO minimum by enumerating sign patterns in {-1, 0, 1}^m. For each pattern
// the stationary point of the smooth restricted problem is kept if its signs agree.
inline double lasso_enumerate(const MatrixXd& d, const VectorXd& b, double lambda, VectorXd* argmin = nullptr) {
  const int m = static_cast<int>(d.cols());
  int patterns = 1;
  for (int j = 0; j < m; ++j) patterns *= 3;
  double best = std::numeric_limits<double>::infinity();
  for (int code = 0; code < patterns; ++code) {
    std::vector<int> support, sign;
    for (int j = 0, c = code; j < m; ++j, c /= 3) {
      if (c % 3 != 0) {
        support.push_back(j);
        sign.push_back(c % 3 == 1 ? 1 : -1);
      }
    }
    VectorXd a = VectorXd::Zero(m);
    if (!support.empty()) {
      const int k = static_cast<int>(support.size());
      MatrixXd ds(d.rows(), k);
      VectorXd s(k);
      for (int t = 0; t < k; ++t) {
        ds.col(t) = d.col(support[t]);
        s[t] = sign[t];
      }
      const VectorXd as = (ds.transpose() * ds).ldlt().solve(ds.transpose() * b - lambda * s);
      bool consistent = true;
      for (int t = 0; t < k; ++t) consistent = consistent && as[t] * s[t] > 0.0;
      if (!consistent) continue;
      for (int t = 0; t < k; ++t) a[support[t]] = as[t];
    }
    const double obj = lasso_objective(d, b, a, lambda);
    if (obj < best) {
      best = obj;
      if (argmin) *argmin = a;
    }
  }
  return best;
}

// Largest violation of the LASSO subgradient conditions.
inline double lasso_kkt(const MatrixXd& d, const VectorXd& b, const VectorXd& a, double lambda) {
  const VectorXd c = d.transpose() * (b - d * a);
  double worst = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    const double v = a[j] != 0.0 ? std::abs(c[j] - lambda * (a[j] > 0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(c[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

// Greedy bipartite matching on |A^T B|: repeatedly take the largest remaining entry.
inline std::vector<double> greedy_match(const MatrixXd& a, const MatrixXd& b) {
  const MatrixXd c = (a.transpose() * b).cwiseAbs();
  std::vector<char> row_used(c.rows(), 0), col_used(c.cols(), 0);
  std::vector<double> scores;
  const auto pairs = std::min(c.rows(), c.cols());
  for (Eigen::Index k = 0; k < pairs; ++k) {
    double best = -1.0;
    Eigen::Index bi = 0, bj = 0;
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      if (row_used[i]) continue;
      for (Eigen::Index j = 0; j < c.cols(); ++j) {
        if (!col_used[j] && c(i, j) > best) {
          best = c(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    row_used[bi] = col_used[bj] = 1;
    scores.push_back(best);
  }
  return scores;
}

struct SyntheticCsc {
  slicedict::LocalDictionary dictionary;
  slicedict::Image image;
  int occurrences = 0;
};

// Image built as sum_i R_i^T D a_i with 2-sparse needles, amplitudes +-U(1, 2).
// Active slices sit at least `spacing` grid steps apart in one direction.
inline SyntheticCsc synthetic_csc(int side, int f, int m, double density, int spacing, std::uint64_t dict_seed,
                                  std::uint64_t layout_seed) {
  SyntheticCsc out;
  out.dictionary = slicedict::init_dictionary(f * f, m, dict_seed);
  const slicedict::PatchGeometry g(side, side, f);
  std::mt19937_64 rng(layout_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto amplitude = [&] { return (u(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + u(rng)); };
  MatrixXd slices = MatrixXd::Zero(f * f, g.slice_count());
  std::vector<std::pair<int, int>> placed;
  for (int i = 0; i < g.slice_count(); ++i) {
    const int r = i / g.grid_cols(), c = i % g.grid_cols();
    bool free = true;
    for (const auto& [pr, pc] : placed) free = free && (std::abs(pr - r) >= spacing || std::abs(pc - c) >= spacing);
    if (!free || u(rng) >= density) continue;
    placed.emplace_back(r, c);
    const int j1 = static_cast<int>(rng() % m);
    int j2 = j1;
    while (j2 == j1) j2 = static_cast<int>(rng() % m);
    VectorXd a = VectorXd::Zero(m);
    a[j1] = amplitude();
    a[j2] = amplitude();
    slices.col(i) = out.dictionary.atoms() * a;
  }
  out.occurrences = static_cast<int>(placed.size());
  out.image = slicedict::aggregate(slices, g);
  return out;
}

struct Composite {
  slicedict::LocalDictionary bank;
  slicedict::Image cartoon;
  slicedict::Image texture;
  slicedict::Image image;  // cartoon + texture
};

// Piecewise-constant cartoon (a bar and a disk) plus sparse texture drawn from four
// zero-mean oriented gratings of side f.
inline Composite synthetic_composite(int side, int f, std::uint64_t seed) {
  MatrixXd bank(f * f, 4);
  for (int k = 0; k < 4; ++k) {
    const double theta = k * std::numbers::pi / 4.0, omega = 2.0 * std::numbers::pi / 3.0;
    for (int a = 0; a < f; ++a)
      for (int b = 0; b < f; ++b) bank(a * f + b, k) = std::cos(omega * (std::cos(theta) * a + std::sin(theta) * b));
    bank.col(k).array() -= bank.col(k).mean();
  }
  Composite out;
  out.bank = slicedict::LocalDictionary::normalized(bank);

  const slicedict::PatchGeometry g(side, side, f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd slices = MatrixXd::Zero(f * f, g.slice_count());
  for (int i = 0; i < g.slice_count(); ++i) {
    if (u(rng) < 0.03) {
      const int j = static_cast<int>(rng() % 4);
      slices.col(i) = out.bank.atom(j) * ((u(rng) < 0.5 ? -1.0 : 1.0) * (1.5 + 1.5 * u(rng)));
    }
  }
  out.texture = slicedict::aggregate(slices, g);
  out.cartoon = slicedict::Image(side, side);
  const double s = side / 64.0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      if (r > 10 * s && r < 40 * s && c > 8 * s && c < 50 * s) out.cartoon(r, c) = 1.0;
      const double dr = r - 44 * s, dc = c - 40 * s;
      if (dr * dr + dc * dc < 225 * s * s) out.cartoon(r, c) = -0.8;
    }
  }
  out.image = out.cartoon;
  out.image.vec() += out.texture.vec();
  return out;
}

inline double correlation(const slicedict::Image& a, const slicedict::Image& b) {
  const VectorXd x = a.vec().array() - a.vec().mean();
  const VectorXd y = b.vec().array() - b.vec().mean();
  return x.dot(y) / (x.norm() * y.norm());
}

} // namespace oracle
