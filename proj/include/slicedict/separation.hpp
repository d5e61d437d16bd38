#pragma once

#include "slicedict/engine.hpp"

#include <cstdint>

namespace slicedict {

enum class TvKind { isotropic, anisotropic };

struct TvOptions {
  TvKind kind = TvKind::isotropic;
  double step = 0.25;
  int max_iterations = 500;
  double tolerance = 1e-6;
};

/// argmin_v 1/2||v - z||^2 + weight * TV(v), forward differences with reflecting
/// boundary, solved by projection on the dual.
Image tv_denoise(const Image& z, double weight, const TvOptions& opts = {});

/// Discrete TV energy matching tv_denoise's definition.
double total_variation(const Image& x, TvKind kind = TvKind::isotropic);

struct SeparationConfig {
  double lambda = 0.1;  // texture sparsity
  double rho = 1.0;     // texture slice penalty
  double eta = 1.0;     // cartoon split penalty
  double xi = 0.1;      // TV weight
  int iterations = 100;
  PursuitConfig pursuit;
  int dictionary_sweeps = 1;
  bool refit_coefficients = false;
  bool learn_dictionary = true;
  TvOptions tv;
  // used when no initial dictionary is supplied
  int filter_side = 8;
  int atoms = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SeparationState {
  SliceField texture;
  Image cartoon;       // X_C
  Image cartoon_split; // Z_C
  Image cartoon_dual;  // V_C
};

/// Cartoon starts at the TV-denoised image, texture slices split the remainder evenly.
SeparationState init_separation(const Image& x, int filter_side, const SeparationConfig& cfg);

/// Exact joint minimizer over the texture slices and X_C of
///   1/2||X - sum R_i^T s_i - X_C||^2 + rho/2 sum||s_i - D a_i + u_i||^2 + eta/2||X_C - Z_C + V_C||^2.
void joint_texture_cartoon_update(SeparationState& state, const Image& x, const LocalDictionary& d,
                                  const SeparationConfig& cfg);

struct SeparationResult {
  Image cartoon;
  Image texture;
  LocalDictionary dictionary;
  SeparationState state;
};

SeparationResult separate(const Image& x, const LocalDictionary& d0, const SeparationConfig& cfg);

/// x + (factor - 1) * texture
Image enhance(const Image& x, const LocalDictionary& d0, const SeparationConfig& cfg, double factor);
Image enhance(const Image& x, const SeparationConfig& cfg, double factor);

} // namespace slicedict
