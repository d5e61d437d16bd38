#include "slicedict/dictionary.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace slicedict {

namespace {

constexpr double kUnitNormTolerance = 1e-10;
constexpr int kPowerIterations = 30;
constexpr double kPowerRelativeChange = 1e-10;

} // namespace

LocalDictionary::LocalDictionary(Eigen::MatrixXd atoms) : atoms_(std::move(atoms)) {
  if (atoms_.rows() < 1 || atoms_.cols() < 1) throw std::invalid_argument("dictionary must have at least one atom");
  if (!atoms_.allFinite()) throw std::invalid_argument("dictionary has non-finite entries");
  for (Eigen::Index j = 0; j < atoms_.cols(); ++j) {
    if (std::abs(atoms_.col(j).norm() - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument("dictionary atom " + std::to_string(j) + " is not unit norm");
    }
  }
}

LocalDictionary LocalDictionary::normalized(Eigen::MatrixXd atoms) {
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    const double norm = atoms.col(j).norm();
    if (!(norm > 0.0)) throw std::invalid_argument("cannot normalize a zero atom");
    atoms.col(j) /= norm;
  }
  return LocalDictionary(std::move(atoms));
}

int LocalDictionary::filter_side() const {
  const int n = patch_size();
  int f = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (f * f != n) throw std::logic_error("patch size " + std::to_string(n) + " is not a square");
  return f;
}

LocalDictionary init_dictionary(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("init_dictionary: n and m must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd atoms(n, m);
  for (int j = 0; j < m; ++j) {
    do {
      for (int r = 0; r < n; ++r) atoms(r, j) = normal(rng);
    } while (atoms.col(j).norm() == 0.0);
  }
  return LocalDictionary::normalized(std::move(atoms));
}

std::vector<int> canonical_signs(Eigen::MatrixXd& atoms) {
  std::vector<int> flipped;
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    for (Eigen::Index r = 0; r < atoms.rows(); ++r) {
      if (atoms(r, j) != 0.0) {
        if (atoms(r, j) < 0.0) {
          atoms.col(j) = -atoms.col(j);
          flipped.push_back(static_cast<int>(j));
        }
        break;
      }
    }
  }
  return flipped;
}

double representation_error(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                            std::span<const Needle> needles) {
  if (static_cast<std::size_t>(targets.cols()) != needles.size()) {
    throw std::invalid_argument("representation_error: targets and needles differ in count");
  }
  double total = 0.0;
  Eigen::VectorXd rec(targets.rows());
  for (std::size_t i = 0; i < needles.size(); ++i) {
    synthesize(d.atoms(), needles[i], rec);
    total += (targets.col(static_cast<Eigen::Index>(i)) - rec).squaredNorm();
  }
  return total;
}

struct DictionaryUpdater {
  struct Use {
    int slice;
    int slot;  // position inside the needle's support
  };

  static DictionaryUpdateResult run(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                    std::span<Needle> needles, const DictionaryUpdateOptions& opts) {
    const int sweeps = opts.sweeps;
    const int m = d.atom_count();
    const auto count = static_cast<Eigen::Index>(needles.size());
    if (count == 0 || targets.cols() == 0) throw std::invalid_argument("dictionary_update: no targets");
    if (targets.cols() != count) throw std::invalid_argument("dictionary_update: targets and needles differ in count");
    if (targets.rows() != d.patch_size()) throw std::invalid_argument("dictionary_update: target length mismatch");
    if (sweeps < 1) throw std::invalid_argument("dictionary_update: sweeps must be at least 1");
    for (const Needle& nd : needles) {
      for (int j : nd.index) {
        if (j < 0 || j >= m) throw std::invalid_argument("dictionary_update: needle references a missing atom");
      }
    }

    Eigen::MatrixXd atoms = d.atoms();
    Eigen::MatrixXd residual(targets.rows(), count);
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::VectorXd rec(targets.rows());
      synthesize(atoms, needles[i], rec);
      residual.col(i) = targets.col(i) - rec;
    }

    DictionaryUpdateResult out;
    std::vector<std::vector<Use>> usage(m);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (auto& u : usage) u.clear();
      for (Eigen::Index i = 0; i < count; ++i) {
        for (int k = 0; k < needles[i].nonzeros(); ++k) {
          usage[needles[i].index[k]].push_back({static_cast<int>(i), k});
        }
      }

      std::vector<char> taken(static_cast<std::size_t>(count), 0);
      for (int j = 0; j < m; ++j) {
        if (usage[j].empty()) {
          replace_dead_atom(atoms, j, targets, residual, taken, opts);
          ++out.replaced_atoms;
          continue;
        }
        update_atom(atoms, j, usage[j], needles, residual, opts.refit_coefficients);
      }

      for (int j : canonical_signs(atoms)) {
        for (const Use& u : usage[j]) needles[u.slice].value[u.slot] = -needles[u.slice].value[u.slot];
      }
      out.fit_per_sweep.push_back(residual.squaredNorm());
    }

    for (Needle& nd : needles) prune_zeros(nd);
    out.dictionary.atoms_ = std::move(atoms);
    return out;
  }

  // Dead atom: becomes the normalized target with the largest residual (lowest index on ties).
  static void replace_dead_atom(Eigen::MatrixXd& atoms, int j, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                const Eigen::MatrixXd& residual, std::vector<char>& taken,
                                const DictionaryUpdateOptions& opts) {
    Eigen::Index best = -1;
    double best_err = -1.0;
    for (Eigen::Index i = 0; i < residual.cols(); ++i) {
      if (taken[i]) continue;
      const double norm = targets.col(i).norm();
      if (norm == 0.0) continue;
      const double err = residual.col(i).squaredNorm();
      if (err > best_err) {
        best_err = err;
        best = i;
      }
    }
    if (best < 0) return;
    taken[best] = 1;
    if (opts.exclude) opts.exclude(best, taken);
    atoms.col(j) = targets.col(best) / targets.col(best).norm();
  }

  static void update_atom(Eigen::MatrixXd& atoms, int j, const std::vector<Use>& uses, std::span<Needle> needles,
                          Eigen::MatrixXd& residual, bool refit) {
    const auto k = static_cast<Eigen::Index>(uses.size());
    Eigen::MatrixXd restricted(atoms.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Use& u = uses[c];
      restricted.col(c) = residual.col(u.slice) + needles[u.slice].value[u.slot] * atoms.col(j);
    }

    Eigen::VectorXd left;
    Eigen::VectorXd right;
    if (refit) {
      // Power iteration on E E^T from the current atom; ||E^T u|| never decreases.
      left = atoms.col(j);
      right = restricted.transpose() * left;
      for (int it = 0; it < kPowerIterations; ++it) {
        Eigen::VectorXd next = restricted * right;
        const double norm = next.norm();
        if (!(norm > 0.0)) break;
        next /= norm;
        const double change = (next - left).norm();
        left = std::move(next);
        right = restricted.transpose() * left;
        if (change < kPowerRelativeChange) break;
      }
    } else {
      right.resize(k);
      for (Eigen::Index c = 0; c < k; ++c) right[c] = needles[uses[c].slice].value[uses[c].slot];
      left = restricted * right;
      const double norm = left.norm();
      if (norm > 0.0) {
        left /= norm;
      } else {
        left = atoms.col(j);
      }
    }
    atoms.col(j) = left;
    for (Eigen::Index c = 0; c < k; ++c) {
      const Use& u = uses[c];
      needles[u.slice].value[u.slot] = right[c];
      residual.col(u.slice) = restricted.col(c) - right[c] * left;
    }
  }

  static void prune_zeros(Needle& nd) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < nd.index.size(); ++r) {
      if (nd.value[r] != 0.0) {
        nd.index[w] = nd.index[r];
        nd.value[w] = nd.value[r];
        ++w;
      }
    }
    nd.index.resize(w);
    nd.value.resize(w);
  }
};

DictionaryUpdateResult dictionary_update(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                         std::span<Needle> needles, const DictionaryUpdateOptions& opts) {
  return DictionaryUpdater::run(d, targets, needles, opts);
}

DictionaryUpdateResult dictionary_update(const LocalDictionary& d, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                         std::span<Needle> needles, int sweeps) {
  DictionaryUpdateOptions opts;
  opts.sweeps = sweeps;
  return DictionaryUpdater::run(d, targets, needles, opts);
}

} // namespace slicedict
