#pragma once

#include "slicedict/dictionary.hpp"
#include "slicedict/image.hpp"
#include "slicedict/pursuit.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace slicedict {

/// Per-position ADMM state: slices, scaled duals and needles, one column/entry per slice.
struct SliceField {
  PatchGeometry geometry;
  Eigen::MatrixXd slices;  // n x N_s
  Eigen::MatrixXd duals;   // n x N_s
  std::vector<Needle> needles;

  int slice_count() const { return geometry.slice_count(); }
  void check() const;
};

struct TrainConfig {
  double lambda = 1.0;
  double rho = 1.0;
  int iterations = 300;
  double subsample = 1.0;  // fraction of slices pursued per iteration, in (0, 1]
  PursuitConfig pursuit;   // lambda is overridden with lambda / rho
  int dictionary_sweeps = 1;
  // K-SVD coefficient refit inside ADMM; off by default because the refit ignores
  // the l1 term and stalls the primal residual.
  bool refit_coefficients = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricsRow {
  int iteration = 0;
  double data_term = 0.0;        // 1/2 ||X - sum R_i^T D a_i||^2
  double l1_term = 0.0;          // lambda sum ||a_i||_1
  double objective = 0.0;        // data_term + l1_term
  double slice_data_term = 0.0;  // 1/2 ||X - sum R_i^T s_i||^2
  double max_primal_residual = 0.0;
  double time_ms = 0.0;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

SliceField init_slicefield(const Image& x, const PatchGeometry& g);

/// sum_i R_i^T (D a_i)
Image reconstruct(const SliceField& field, const LocalDictionary& d);

/// Needle update for the listed slices (all when `subset` is empty), warm-started from
/// the stored needles. Returns the number of solves that hit the sweep limit.
int pursuit_step(SliceField& field, const LocalDictionary& d, const Eigen::MatrixXd& gram, double lambda, double rho,
                 const PursuitConfig& pursuit, std::span<const int> subset = {});

/// Exact joint minimizer of 1/2||X - sum R_i^T s_i||^2 + rho/2 sum ||s_i - D a_i + u_i||^2
/// via slice reconstruction, aggregation and the local-Laplacian correction.
void slice_update(SliceField& field, const Image& x, const LocalDictionary& d, double rho);

/// Masked variant: the aggregated estimate is multiplied by the binary mask before
/// re-extraction. An all-ones mask follows the same arithmetic as slice_update.
void masked_slice_update(SliceField& field, const Image& y, const Image& mask, const LocalDictionary& d, double rho);

/// u_i <- u_i + s_i - D a_i
void dual_update(SliceField& field, const LocalDictionary& d);

/// Objective terms at the needle-feasible point. With a mask the data terms are masked.
MetricsRow csc_objective(const Image& x, const SliceField& field, const LocalDictionary& d, double lambda,
                         const Image* mask = nullptr);

struct TrainResult {
  LocalDictionary dictionary;
  std::vector<SliceField> fields;
  std::vector<MetricsRow> metrics;
};

TrainResult train(std::span<const Image> images, const TrainConfig& cfg, const LocalDictionary& d0,
                  const MetricsSink& sink = {});

struct InpaintResult {
  Image reconstruction;
  LocalDictionary dictionary;
  SliceField field;
  std::vector<MetricsRow> metrics;
};

/// ADMM on 1/2||Y - A D Gamma||^2 + lambda ||Gamma||_1; with `learn_on_corrupted`
/// the dictionary is also updated every iteration.
InpaintResult inpaint(const Image& y, const Image& mask, const LocalDictionary& d, const TrainConfig& cfg,
                      bool learn_on_corrupted = false, const MetricsSink& sink = {});

/// Dictionary update on s_i + u_i over the chosen slices of every field, pooled into one
/// target set. A dead atom may not be seeded from a slice within f - 1 grid steps of one
/// already used in the same sweep, so replacements are not shifted copies of each other.
LocalDictionary pooled_dictionary_update(std::span<SliceField* const> fields,
                                         const std::vector<std::vector<int>>& chosen, const LocalDictionary& d,
                                         int sweeps, bool refit_coefficients);

/// Uniform sample without replacement of round(fraction * count) indices (at least one), sorted.
std::vector<int> sample_subset(int count, double fraction, std::mt19937_64& rng);

} // namespace slicedict
