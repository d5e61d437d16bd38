#pragma once

#include "slicedict/pursuit.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace slicedict {

/// n x m matrix whose columns are unit-norm vectorized filters.
class LocalDictionary {
public:
  LocalDictionary() = default;
  /// Throws if a column is not unit norm (1e-10) or an entry is not finite.
  explicit LocalDictionary(Eigen::MatrixXd atoms);
  /// Normalizes columns; zero columns are rejected.
  static LocalDictionary normalized(Eigen::MatrixXd atoms);

  int patch_size() const { return static_cast<int>(atoms_.rows()); }
  int atom_count() const { return static_cast<int>(atoms_.cols()); }
  /// Side of the square filter; throws if the patch size is not a perfect square.
  int filter_side() const;

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  auto atom(int j) const { return atoms_.col(j); }

  friend bool operator==(const LocalDictionary& a, const LocalDictionary& b) { return a.atoms_ == b.atoms_; }

private:
  friend struct DictionaryUpdater;
  Eigen::MatrixXd atoms_;
};

/// Gaussian columns from a seeded generator, each normalized.
LocalDictionary init_dictionary(int n, int m, std::uint64_t seed);

struct DictionaryUpdateResult {
  LocalDictionary dictionary;
  std::vector<double> fit_per_sweep;  // sum_i ||t_i - D a_i||^2 after each sweep
  int replaced_atoms = 0;
};

struct DictionaryUpdateOptions {
  int sweeps = 1;
  // true: K-SVD rank-1 refit of atom and coefficients. false: only the atom moves,
  // to E a / ||E a|| with the coefficients a held (still fit-monotone).
  bool refit_coefficients = true;
  // Called after target `taken` seeds a dead atom; may mark further targets as
  // unavailable for later replacements in the same sweep.
  std::function<void(Eigen::Index taken, std::vector<char>& excluded)> exclude;
};

/// Passes over the atoms. Targets are the columns of `targets`; `needles`
/// are updated in place on their existing supports.
DictionaryUpdateResult dictionary_update(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                         std::span<Needle> needles, const DictionaryUpdateOptions& opts);
DictionaryUpdateResult dictionary_update(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                         std::span<Needle> needles, int sweeps = 1);

/// sum_i ||t_i - D a_i||^2
double representation_error(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                            std::span<const Needle> needles);

/// Flip atom signs so the first nonzero entry of each is non-negative; returns flipped atom indices.
std::vector<int> canonical_signs(Eigen::MatrixXd& atoms);

} // namespace slicedict
