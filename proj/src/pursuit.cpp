#include "slicedict/pursuit.hpp"

#include "slicedict/dictionary.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace slicedict {

double Needle::l1_norm() const {
  double s = 0.0;
  for (double v : value) s += std::abs(v);
  return s;
}

Eigen::VectorXd Needle::to_dense(int atoms) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(atoms);
  for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] = value[k];
  return out;
}

Needle Needle::from_dense(const Eigen::Ref<const Eigen::VectorXd>& dense) {
  Needle n;
  for (Eigen::Index j = 0; j < dense.size(); ++j) {
    if (dense[j] != 0.0) {
      n.index.push_back(static_cast<int>(j));
      n.value.push_back(dense[j]);
    }
  }
  return n;
}

void synthesize(const Eigen::MatrixXd& atoms, const Needle& needle, Eigen::Ref<Eigen::VectorXd> out) {
  out.setZero();
  for (std::size_t k = 0; k < needle.index.size(); ++k) {
    out.noalias() += needle.value[k] * atoms.col(needle.index[k]);
  }
}

void PursuitConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("pursuit: lambda must be non-negative");
  if (max_sweeps < 1) throw std::invalid_argument("pursuit: max_sweeps must be at least 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("pursuit: tolerance must be positive");
  if (max_nonzeros && *max_nonzeros < 1) throw std::invalid_argument("pursuit: nonzero cap must be at least 1");
}

Eigen::MatrixXd gram(const LocalDictionary& d) {
  Eigen::MatrixXd g = d.atoms().transpose() * d.atoms();
  // exact symmetry; the product above can differ in the last bit across triangles
  g = (0.5 * (g + g.transpose())).eval();
  return g;
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double kkt_from_correlation(const Eigen::VectorXd& corr, const Eigen::VectorXd& alpha, double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    const double v = alpha[j] != 0.0 ? std::abs(corr[j] - std::copysign(lambda, alpha[j]))
                                     : std::max(0.0, std::abs(corr[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

// One pass over `coords`; returns the largest coordinate move.
double sweep(const Eigen::MatrixXd& g, double lambda, Eigen::VectorXd& alpha, Eigen::VectorXd& corr,
             const std::vector<int>& coords) {
  double max_delta = 0.0;
  for (int j : coords) {
    const double gjj = g(j, j);
    if (gjj <= 0.0) continue;
    const double updated = soft_threshold(corr[j] + gjj * alpha[j], lambda) / gjj;
    const double delta = updated - alpha[j];
    if (delta != 0.0) {
      corr.noalias() -= delta * g.col(j);
      alpha[j] = updated;
      max_delta = std::max(max_delta, std::abs(delta));
    }
  }
  return max_delta;
}

void cap_and_refit(const Eigen::MatrixXd& g, const Eigen::VectorXd& dtb, Eigen::VectorXd& alpha, int cap) {
  std::vector<int> support;
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    if (alpha[j] != 0.0) support.push_back(static_cast<int>(j));
  }
  if (static_cast<int>(support.size()) <= cap) return;
  std::stable_sort(support.begin(), support.end(),
                   [&](int a, int b) { return std::abs(alpha[a]) > std::abs(alpha[b]); });
  support.resize(cap);
  std::sort(support.begin(), support.end());

  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd gss(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    rhs[a] = dtb[support[a]];
    for (Eigen::Index b = 0; b < k; ++b) gss(a, b) = g(support[a], support[b]);
  }
  const Eigen::VectorXd sol = gss.ldlt().solve(rhs);
  alpha.setZero();
  for (Eigen::Index a = 0; a < k; ++a) alpha[support[a]] = sol[a];
}

} // namespace

PursuitResult lasso_solve(const LocalDictionary& d, const Eigen::MatrixXd& g,
                          const Eigen::Ref<const Eigen::VectorXd>& b, const PursuitConfig& cfg,
                          const Needle* warm_start) {
  cfg.validate();
  const int m = d.atom_count();
  if (b.size() != d.patch_size()) throw std::invalid_argument("lasso_solve: signal length does not match dictionary");
  if (g.rows() != m || g.cols() != m) throw std::invalid_argument("lasso_solve: Gram matrix has wrong shape");

  const Eigen::VectorXd dtb = d.atoms().transpose() * b;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  if (warm_start) {
    for (std::size_t k = 0; k < warm_start->index.size(); ++k) {
      if (warm_start->index[k] < 0 || warm_start->index[k] >= m) {
        throw std::invalid_argument("lasso_solve: warm start references a missing atom");
      }
      alpha[warm_start->index[k]] = warm_start->value[k];
    }
  }
  Eigen::VectorXd corr = dtb - g * alpha;

  std::vector<int> all(m);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> active;

  PursuitResult res;
  res.converged = false;
  while (res.sweeps < cfg.max_sweeps) {
    const double full_delta = sweep(g, cfg.lambda, alpha, corr, all);
    ++res.sweeps;
    if (full_delta < cfg.tolerance) {
      corr = dtb - g * alpha;  // drop accumulated rounding before testing optimality
      if (kkt_from_correlation(corr, alpha, cfg.lambda) <= cfg.tolerance) {
        res.converged = true;
        break;
      }
      continue;
    }
    // iterate on the current support until it settles, then re-check all atoms
    active.clear();
    for (int j = 0; j < m; ++j) {
      if (alpha[j] != 0.0) active.push_back(j);
    }
    while (res.sweeps < cfg.max_sweeps) {
      const double delta = sweep(g, cfg.lambda, alpha, corr, active);
      ++res.sweeps;
      if (delta < cfg.tolerance) break;
    }
  }

  if (cfg.max_nonzeros) cap_and_refit(g, dtb, alpha, *cfg.max_nonzeros);
  res.needle = Needle::from_dense(alpha);
  return res;
}

PursuitResult lasso_solve(const LocalDictionary& d, const Eigen::Ref<const Eigen::VectorXd>& b,
                          const PursuitConfig& cfg) {
  return lasso_solve(d, gram(d), b, cfg);
}

double lasso_objective(const Eigen::MatrixXd& atoms, const Eigen::Ref<const Eigen::VectorXd>& b,
                       const Needle& needle, double lambda) {
  Eigen::VectorXd r(b.size());
  synthesize(atoms, needle, r);
  return 0.5 * (b - r).squaredNorm() + lambda * needle.l1_norm();
}

double kkt_residual(const Eigen::MatrixXd& atoms, const Eigen::Ref<const Eigen::VectorXd>& b,
                    const Needle& needle, double lambda) {
  Eigen::VectorXd r(b.size());
  synthesize(atoms, needle, r);
  const Eigen::VectorXd corr = atoms.transpose() * (b - r);
  return kkt_from_correlation(corr, needle.to_dense(static_cast<int>(atoms.cols())), lambda);
}

} // namespace slicedict
