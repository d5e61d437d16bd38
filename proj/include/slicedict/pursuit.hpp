#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace slicedict {

class LocalDictionary;

/// Sparse code of one slice: atom indices in increasing order with nonzero values.
struct Needle {
  std::vector<int> index;
  std::vector<double> value;

  int nonzeros() const { return static_cast<int>(index.size()); }
  bool empty() const { return index.empty(); }
  double l1_norm() const;

  Eigen::VectorXd to_dense(int atoms) const;
  static Needle from_dense(const Eigen::Ref<const Eigen::VectorXd>& dense);

  friend bool operator==(const Needle&, const Needle&) = default;
};

/// out = D * needle
void synthesize(const Eigen::MatrixXd& atoms, const Needle& needle, Eigen::Ref<Eigen::VectorXd> out);

struct PursuitConfig {
  double lambda = 0.0;  // weight of the l1 term in 1/2||b - D a||^2 + lambda ||a||_1
  int max_sweeps = 200;
  double tolerance = 1e-6;
  std::optional<int> max_nonzeros;

  void validate() const;
};

struct PursuitResult {
  Needle needle;
  int sweeps = 0;
  bool converged = true;  // false: best iterate after max_sweeps
};

Eigen::MatrixXd gram(const LocalDictionary& d);

/// Cyclic coordinate descent on the LASSO with a precomputed Gram matrix.
/// Converged when a sweep moves no coordinate by more than the tolerance and the
/// KKT residual is below it. `warm_start` seeds the iterate.
PursuitResult lasso_solve(const LocalDictionary& d, const Eigen::MatrixXd& gram,
                          const Eigen::Ref<const Eigen::VectorXd>& b, const PursuitConfig& cfg,
                          const Needle* warm_start = nullptr);

PursuitResult lasso_solve(const LocalDictionary& d, const Eigen::Ref<const Eigen::VectorXd>& b,
                          const PursuitConfig& cfg);

double lasso_objective(const Eigen::MatrixXd& atoms, const Eigen::Ref<const Eigen::VectorXd>& b,
                       const Needle& needle, double lambda);

/// Largest first-order optimality violation of `needle` for the LASSO.
double kkt_residual(const Eigen::MatrixXd& atoms, const Eigen::Ref<const Eigen::VectorXd>& b,
                    const Needle& needle, double lambda);

} // namespace slicedict
