#include "slicedict/separation.hpp"

#include "slicedict/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace slicedict {

namespace {

// Forward differences; zero across the last row/column (reflecting boundary).
void gradient(const Image& u, Image& gx, Image& gy) {
  const int h = u.height(), w = u.width();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      gx(r, c) = c + 1 < w ? u(r, c + 1) - u(r, c) : 0.0;
      gy(r, c) = r + 1 < h ? u(r + 1, c) - u(r, c) : 0.0;
    }
  }
}

// Negative adjoint of gradient().
void divergence(const Image& px, const Image& py, Image& out) {
  const int h = px.height(), w = px.width();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double dx = 0.0;
      if (c + 1 < w) dx += px(r, c);
      if (c > 0) dx -= px(r, c - 1);
      double dy = 0.0;
      if (r + 1 < h) dy += py(r, c);
      if (r > 0) dy -= py(r - 1, c);
      out(r, c) = dx + dy;
    }
  }
}

} // namespace

double total_variation(const Image& x, TvKind kind) {
  Image gx(x.height(), x.width()), gy(x.height(), x.width());
  gradient(x, gx, gy);
  double tv = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double a = gx.pixels()[k], b = gy.pixels()[k];
    tv += kind == TvKind::isotropic ? std::hypot(a, b) : std::abs(a) + std::abs(b);
  }
  return tv;
}

Image tv_denoise(const Image& z, double weight, const TvOptions& opts) {
  if (!(weight >= 0.0)) throw std::invalid_argument("tv_denoise: weight must be non-negative");
  if (!(opts.step > 0.0) || opts.max_iterations < 1 || !(opts.tolerance > 0.0)) {
    throw std::invalid_argument("tv_denoise: invalid solver options");
  }
  if (weight == 0.0) return z;

  const int h = z.height(), w = z.width();
  Image px(h, w), py(h, w), div(h, w), gx(h, w), gy(h, w), work(h, w);
  const double tau = opts.step;

  for (int it = 0; it < opts.max_iterations; ++it) {
    divergence(px, py, div);
    work.vec() = div.vec() - z.vec() / weight;
    gradient(work, gx, gy);

    double max_change = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      double& a = px.pixels()[k];
      double& b = py.pixels()[k];
      const double ga = gx.pixels()[k], gb = gy.pixels()[k];
      double na, nb;
      if (opts.kind == TvKind::isotropic) {
        const double denom = 1.0 + tau * std::hypot(ga, gb);
        na = (a + tau * ga) / denom;
        nb = (b + tau * gb) / denom;
      } else {
        na = std::clamp(a + tau * ga, -1.0, 1.0);
        nb = std::clamp(b + tau * gb, -1.0, 1.0);
      }
      max_change = std::max({max_change, std::abs(na - a), std::abs(nb - b)});
      a = na;
      b = nb;
    }
    if (max_change < opts.tolerance) break;
  }

  divergence(px, py, div);
  Image out = z;
  out.vec() -= weight * div.vec();
  return out;
}

void SeparationConfig::validate() const {
  if (!(rho > 0.0) || !(eta > 0.0)) throw std::invalid_argument("separation: rho and eta must be positive");
  if (!(lambda >= 0.0) || !(xi >= 0.0)) throw std::invalid_argument("separation: lambda and xi must be non-negative");
  if (iterations < 0) throw std::invalid_argument("separation: iterations must be non-negative");
  if (dictionary_sweeps < 1) throw std::invalid_argument("separation: dictionary sweeps must be at least 1");
  if (filter_side < 1 || atoms < 1) throw std::invalid_argument("separation: invalid dictionary shape");
}

SeparationState init_separation(const Image& x, int filter_side, const SeparationConfig& cfg) {
  SeparationState st;
  st.cartoon = tv_denoise(x, cfg.xi, cfg.tv);
  st.cartoon_split = st.cartoon;
  st.cartoon_dual = Image(x.height(), x.width());
  Image remainder = x;
  remainder.vec() -= st.cartoon.vec();
  st.texture = init_slicefield(remainder, PatchGeometry::for_image(x, filter_side));
  return st;
}

// Normal equations, with Z_i = D a_i - u_i, W = Z_C - V_C, c = eta / (1 + eta):
//   X_C = (X - G + eta W) / (1 + eta),  G = sum R_i^T s_i
//   s_i = Z_i - c / (rho + c n) * R_i (sum_j R_j^T Z_j - (X - W))
// Large eta pins X_C to W and the slice step reduces to slice_update on X - W.
void joint_texture_cartoon_update(SeparationState& state, const Image& x, const LocalDictionary& d,
                                  const SeparationConfig& cfg) {
  cfg.validate();
  SliceField& field = state.texture;
  field.check();
  const PatchGeometry& g = field.geometry;
  if (d.patch_size() != g.patch_size()) throw std::invalid_argument("dictionary patch size does not match geometry");
  if (!x.same_shape(state.cartoon) || x.height() != g.height || x.width() != g.width) {
    throw std::invalid_argument("separation state does not match the image");
  }

  const double c = cfg.eta / (1.0 + cfg.eta);
  const double shrink = c / (cfg.rho + c * g.patch_size());

  Eigen::MatrixXd& s = field.slices;
  parallel_for(0, g.slice_count(), [&](int i) {
    Eigen::VectorXd rec(g.patch_size());
    synthesize(d.atoms(), field.needles[i], rec);
    s.col(i) = rec - field.duals.col(i);
  });

  Image split_target = state.cartoon_split;  // W
  split_target.vec() -= state.cartoon_dual.vec();
  Image mismatch = aggregate(s, g);
  mismatch.vec() -= x.vec() - split_target.vec();

  parallel_for(0, g.slice_count(), [&](int i) {
    Eigen::VectorXd patch(g.patch_size());
    extract_patch_into(mismatch, g, i, patch);
    s.col(i) -= shrink * patch;
  });

  const Image texture_sum = aggregate(s, g);
  state.cartoon.vec() = (x.vec() - texture_sum.vec() + cfg.eta * split_target.vec()) / (1.0 + cfg.eta);
}

SeparationResult separate(const Image& x, const LocalDictionary& d0, const SeparationConfig& cfg) {
  cfg.validate();
  if (!x.all_finite()) throw std::invalid_argument("separate: image has non-finite samples");
  const int f = d0.filter_side();
  if (x.height() < f || x.width() < f) throw std::invalid_argument("separate: image smaller than filter");

  SeparationResult out;
  out.dictionary = d0;
  out.state = init_separation(x, f, cfg);
  SeparationState& st = out.state;

  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::MatrixXd gm = gram(out.dictionary);
    pursuit_step(st.texture, out.dictionary, gm, cfg.lambda, cfg.rho, cfg.pursuit);
    joint_texture_cartoon_update(st, x, out.dictionary, cfg);

    Image split_input = st.cartoon;
    split_input.vec() += st.cartoon_dual.vec();
    st.cartoon_split = tv_denoise(split_input, cfg.xi / cfg.eta, cfg.tv);

    dual_update(st.texture, out.dictionary);
    st.cartoon_dual.vec() += st.cartoon.vec() - st.cartoon_split.vec();

    if (cfg.learn_dictionary) {
      SliceField* fields[] = {&st.texture};
      std::vector<std::vector<int>> all(1, std::vector<int>(static_cast<std::size_t>(st.texture.slice_count())));
      std::iota(all[0].begin(), all[0].end(), 0);
      out.dictionary =
          pooled_dictionary_update(fields, all, out.dictionary, cfg.dictionary_sweeps, cfg.refit_coefficients);
    }
  }

  out.cartoon = st.cartoon;
  out.texture = reconstruct(st.texture, out.dictionary);
  return out;
}

Image enhance(const Image& x, const LocalDictionary& d0, const SeparationConfig& cfg, double factor) {
  if (!(factor >= 0.0)) throw std::invalid_argument("enhance: factor must be non-negative");
  const SeparationResult sep = separate(x, d0, cfg);
  Image out = x;
  out.vec() += (factor - 1.0) * sep.texture.vec();
  return out;
}

Image enhance(const Image& x, const SeparationConfig& cfg, double factor) {
  cfg.validate();
  const int n = cfg.filter_side * cfg.filter_side;
  return enhance(x, init_dictionary(n, cfg.atoms, cfg.seed), cfg, factor);
}

} // namespace slicedict
