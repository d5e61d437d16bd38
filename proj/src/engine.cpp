#include "slicedict/engine.hpp"

#include "slicedict/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace slicedict {

void SliceField::check() const {
  const auto n = static_cast<Eigen::Index>(geometry.patch_size());
  const auto count = static_cast<Eigen::Index>(geometry.slice_count());
  if (slices.rows() != n || slices.cols() != count || duals.rows() != n || duals.cols() != count ||
      static_cast<Eigen::Index>(needles.size()) != count) {
    throw std::invalid_argument("slice field does not match its geometry");
  }
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw std::invalid_argument("subsample fraction must be in (0, 1]");
  if (dictionary_sweeps < 1) throw std::invalid_argument("dictionary sweeps must be at least 1");
  PursuitConfig p = pursuit;
  p.lambda = lambda / rho;
  p.validate();
}

SliceField init_slicefield(const Image& x, const PatchGeometry& g) {
  SliceField field;
  field.geometry = g;
  field.slices = extract_all(x, g) / static_cast<double>(g.patch_size());
  field.duals = Eigen::MatrixXd::Zero(g.patch_size(), g.slice_count());
  field.needles.assign(static_cast<std::size_t>(g.slice_count()), Needle{});
  return field;
}

namespace {

void check_dictionary(const SliceField& field, const LocalDictionary& d) {
  field.check();
  if (d.patch_size() != field.geometry.patch_size()) {
    throw std::invalid_argument("dictionary patch size does not match slice geometry");
  }
}

Eigen::MatrixXd synthesize_all(const SliceField& field, const LocalDictionary& d) {
  Eigen::MatrixXd out(field.geometry.patch_size(), field.slice_count());
  parallel_for(0, field.slice_count(), [&](int i) { synthesize(d.atoms(), field.needles[i], out.col(i)); });
  return out;
}

void check_mask(const Image& mask, const Image& y) {
  if (!mask.same_shape(y)) throw std::invalid_argument("mask and image dimensions differ");
  for (double v : mask.pixels()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask entries must be 0 or 1");
  }
}

// Shared by the plain and masked updates so an all-ones mask reproduces slice_update bit for bit.
void local_laplacian_update(SliceField& field, const Image& x, const Image* mask, const LocalDictionary& d,
                            double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  check_dictionary(field, d);
  const PatchGeometry& g = field.geometry;
  if (x.height() != g.height || x.width() != g.width) throw std::invalid_argument("image does not match slice geometry");

  const double inv_rho = 1.0 / rho;
  Eigen::MatrixXd& p = field.slices;
  parallel_for(0, g.slice_count(), [&](int i) {
    Eigen::VectorXd rec(g.patch_size());
    synthesize(d.atoms(), field.needles[i], rec);
    extract_patch_into(x, g, i, p.col(i));
    p.col(i) = inv_rho * p.col(i) + rec - field.duals.col(i);
  });

  Image estimate = aggregate(p, g);
  if (mask) estimate.vec().array() *= mask->vec().array();

  const double shrink = 1.0 / (rho + g.patch_size());
  parallel_for(0, g.slice_count(), [&](int i) {
    Eigen::VectorXd patch(g.patch_size());
    extract_patch_into(estimate, g, i, patch);
    p.col(i) -= shrink * patch;
  });
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void check_image_for_training(const Image& x, int f) {
  if (x.empty()) throw std::invalid_argument("empty image");
  if (!x.all_finite()) throw std::invalid_argument("image has non-finite samples");
  if (x.height() < f || x.width() < f) {
    throw std::invalid_argument("image " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                                " is smaller than the " + std::to_string(f) + "x" + std::to_string(f) + " filter");
  }
}

void accumulate(MetricsRow& total, const MetricsRow& part) {
  total.data_term += part.data_term;
  total.l1_term += part.l1_term;
  total.objective += part.objective;
  total.slice_data_term += part.slice_data_term;
  total.max_primal_residual = std::max(total.max_primal_residual, part.max_primal_residual);
}

std::vector<int> all_indices(int count) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

} // namespace

LocalDictionary pooled_dictionary_update(std::span<SliceField* const> fields,
                                         const std::vector<std::vector<int>>& chosen, const LocalDictionary& d,
                                         int sweeps, bool refit_coefficients) {
  if (chosen.size() != fields.size()) throw std::invalid_argument("pooled update: one subset per field expected");
  Eigen::Index total = 0;
  for (const auto& c : chosen) total += static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd targets(d.patch_size(), total);
  std::vector<Needle> needles;
  needles.reserve(static_cast<std::size_t>(total));
  struct Origin {
    std::size_t field;
    int slice;
  };
  std::vector<Origin> origin;
  origin.reserve(static_cast<std::size_t>(total));
  std::vector<std::vector<Eigen::Index>> column(fields.size());
  Eigen::Index col = 0;
  for (std::size_t f = 0; f < fields.size(); ++f) {
    column[f].assign(static_cast<std::size_t>(fields[f]->slice_count()), -1);
    for (int i : chosen[f]) {
      column[f][i] = col;
      origin.push_back({f, i});
      targets.col(col++) = fields[f]->slices.col(i) + fields[f]->duals.col(i);
      needles.push_back(std::move(fields[f]->needles[i]));
    }
  }

  DictionaryUpdateOptions opts;
  opts.sweeps = sweeps;
  opts.refit_coefficients = refit_coefficients;
  opts.exclude = [&](Eigen::Index taken, std::vector<char>& excluded) {
    const auto [f, i] = origin[static_cast<std::size_t>(taken)];
    const PatchGeometry& g = fields[f]->geometry;
    const int reach = g.filter - 1;
    const int r0 = i / g.grid_cols(), c0 = i % g.grid_cols();
    for (int r = std::max(0, r0 - reach); r <= std::min(g.grid_rows() - 1, r0 + reach); ++r) {
      for (int c = std::max(0, c0 - reach); c <= std::min(g.grid_cols() - 1, c0 + reach); ++c) {
        const Eigen::Index k = column[f][static_cast<std::size_t>(r * g.grid_cols() + c)];
        if (k >= 0) excluded[static_cast<std::size_t>(k)] = 1;
      }
    }
  };
  DictionaryUpdateResult res = dictionary_update(d, targets, needles, opts);
  for (std::size_t k = 0; k < origin.size(); ++k) {
    fields[origin[k].field]->needles[origin[k].slice] = std::move(needles[k]);
  }
  return std::move(res.dictionary);
}

Image reconstruct(const SliceField& field, const LocalDictionary& d) {
  check_dictionary(field, d);
  return aggregate(synthesize_all(field, d), field.geometry);
}

int pursuit_step(SliceField& field, const LocalDictionary& d, const Eigen::MatrixXd& gram, double lambda, double rho,
                 const PursuitConfig& pursuit, std::span<const int> subset) {
  check_dictionary(field, d);
  PursuitConfig cfg = pursuit;
  cfg.lambda = lambda / rho;
  cfg.validate();

  const int count = subset.empty() ? field.slice_count() : static_cast<int>(subset.size());
  std::vector<char> approximate(static_cast<std::size_t>(count), 0);
  parallel_for(0, count, [&](int k) {
    const int i = subset.empty() ? k : subset[k];
    const Eigen::VectorXd b = field.slices.col(i) + field.duals.col(i);
    PursuitResult res = lasso_solve(d, gram, b, cfg, &field.needles[i]);
    field.needles[i] = std::move(res.needle);
    approximate[k] = res.converged ? 0 : 1;
  });
  return static_cast<int>(std::count(approximate.begin(), approximate.end(), 1));
}

void slice_update(SliceField& field, const Image& x, const LocalDictionary& d, double rho) {
  local_laplacian_update(field, x, nullptr, d, rho);
}

void masked_slice_update(SliceField& field, const Image& y, const Image& mask, const LocalDictionary& d, double rho) {
  check_mask(mask, y);
  local_laplacian_update(field, y, &mask, d, rho);
}

void dual_update(SliceField& field, const LocalDictionary& d) {
  check_dictionary(field, d);
  parallel_for(0, field.slice_count(), [&](int i) {
    Eigen::VectorXd rec(field.geometry.patch_size());
    synthesize(d.atoms(), field.needles[i], rec);
    field.duals.col(i) += field.slices.col(i) - rec;
  });
}

MetricsRow csc_objective(const Image& x, const SliceField& field, const LocalDictionary& d, double lambda,
                         const Image* mask) {
  check_dictionary(field, d);
  const PatchGeometry& g = field.geometry;
  const Eigen::MatrixXd rec = synthesize_all(field, d);

  Eigen::VectorXd needle_err = x.vec() - aggregate(rec, g).vec();
  Eigen::VectorXd slice_err = x.vec() - aggregate(field.slices, g).vec();
  if (mask) {
    check_mask(*mask, x);
    needle_err.array() *= mask->vec().array();
    slice_err.array() *= mask->vec().array();
  }

  MetricsRow row;
  row.data_term = 0.5 * needle_err.squaredNorm();
  row.slice_data_term = 0.5 * slice_err.squaredNorm();
  double l1 = 0.0;
  for (const Needle& nd : field.needles) l1 += nd.l1_norm();
  row.l1_term = lambda * l1;
  row.objective = row.data_term + row.l1_term;
  row.max_primal_residual = (field.slices - rec).colwise().norm().maxCoeff();
  return row;
}

std::vector<int> sample_subset(int count, double fraction, std::mt19937_64& rng) {
  if (count < 1) return {};
  if (fraction >= 1.0) return all_indices(count);
  const int k = std::clamp(static_cast<int>(std::lround(fraction * count)), 1, count);
  // partial Fisher-Yates with explicit index draws, independent of std::sample's strategy
  std::vector<int> idx = all_indices(count);
  for (int a = 0; a < k; ++a) {
    const std::uint64_t span = static_cast<std::uint64_t>(count - a);
    const int b = a + static_cast<int>(rng() % span);
    std::swap(idx[a], idx[b]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

TrainResult train(std::span<const Image> images, const TrainConfig& cfg, const LocalDictionary& d0,
                  const MetricsSink& sink) {
  cfg.validate();
  if (images.empty()) throw std::invalid_argument("train: no images");
  const int f = d0.filter_side();

  TrainResult out;
  out.dictionary = d0;
  out.fields.reserve(images.size());
  for (const Image& x : images) {
    check_image_for_training(x, f);
    out.fields.push_back(init_slicefield(x, PatchGeometry::for_image(x, f)));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<SliceField*> field_ptrs;
  for (SliceField& fld : out.fields) field_ptrs.push_back(&fld);

  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::MatrixXd g = gram(out.dictionary);

    std::vector<std::vector<int>> chosen;
    for (std::size_t k = 0; k < images.size(); ++k) {
      SliceField& field = out.fields[k];
      chosen.push_back(sample_subset(field.slice_count(), cfg.subsample, rng));
      const std::span<const int> subset =
          cfg.subsample < 1.0 ? std::span<const int>(chosen.back()) : std::span<const int>{};
      pursuit_step(field, out.dictionary, g, cfg.lambda, cfg.rho, cfg.pursuit, subset);
      slice_update(field, images[k], out.dictionary, cfg.rho);
      dual_update(field, out.dictionary);
    }

    out.dictionary = pooled_dictionary_update(field_ptrs, chosen, out.dictionary, cfg.dictionary_sweeps,
                                              cfg.refit_coefficients);

    MetricsRow row;
    row.iteration = it;
    for (std::size_t k = 0; k < images.size(); ++k) {
      accumulate(row, csc_objective(images[k], out.fields[k], out.dictionary, cfg.lambda));
    }
    row.time_ms = elapsed_ms(start);
    out.metrics.push_back(row);
    if (sink) sink(row);
  }
  return out;
}

InpaintResult inpaint(const Image& y, const Image& mask, const LocalDictionary& d, const TrainConfig& cfg,
                      bool learn_on_corrupted, const MetricsSink& sink) {
  cfg.validate();
  check_mask(mask, y);
  const int f = d.filter_side();
  check_image_for_training(y, f);

  InpaintResult out;
  out.dictionary = d;
  out.field = init_slicefield(y, PatchGeometry::for_image(y, f));
  std::mt19937_64 rng(cfg.seed);

  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::MatrixXd g = gram(out.dictionary);
    std::vector<std::vector<int>> chosen{sample_subset(out.field.slice_count(), cfg.subsample, rng)};
    const std::span<const int> subset =
        cfg.subsample < 1.0 ? std::span<const int>(chosen.front()) : std::span<const int>{};
    pursuit_step(out.field, out.dictionary, g, cfg.lambda, cfg.rho, cfg.pursuit, subset);
    masked_slice_update(out.field, y, mask, out.dictionary, cfg.rho);
    dual_update(out.field, out.dictionary);
    if (learn_on_corrupted) {
      SliceField* fields[] = {&out.field};
      out.dictionary = pooled_dictionary_update(fields, chosen, out.dictionary, cfg.dictionary_sweeps,
                                                cfg.refit_coefficients);
    }

    MetricsRow row = csc_objective(y, out.field, out.dictionary, cfg.lambda, &mask);
    row.iteration = it;
    row.time_ms = elapsed_ms(start);
    out.metrics.push_back(row);
    if (sink) sink(row);
  }
  out.reconstruction = reconstruct(out.field, out.dictionary);
  return out;
}

} // namespace slicedict
