#include "slicedict/image.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace slicedict {

Image::Image(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  pixels_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image::Image(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("pixel count does not match image dimensions");
  }
}

bool Image::all_finite() const {
  for (double v : pixels_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

PatchGeometry::PatchGeometry(int h, int w, int f) : height(h), width(w), filter(f) {
  if (h < 1 || w < 1) throw std::invalid_argument("geometry: image dimensions must be positive");
  if (f < 1) throw std::invalid_argument("geometry: filter side must be positive");
}

namespace {

void check_index(const PatchGeometry& g, int i) {
  if (i < 0 || i >= g.slice_count()) {
    throw std::out_of_range("slice index " + std::to_string(i) + " outside [0, " +
                            std::to_string(g.slice_count()) + ")");
  }
}

void check_shape(const Image& x, const PatchGeometry& g) {
  if (x.height() != g.height || x.width() != g.width) {
    throw std::invalid_argument("image does not match patch geometry");
  }
}

} // namespace

void extract_patch_into(const Image& x, const PatchGeometry& g, int i, Eigen::Ref<Eigen::VectorXd> out) {
  check_index(g, i);
  check_shape(x, g);
  const int f = g.filter;
  const int top = i / g.grid_cols() - (f - 1);
  const int left = i % g.grid_cols() - (f - 1);
  for (int dr = 0; dr < f; ++dr) {
    const int r = top + dr;
    for (int dc = 0; dc < f; ++dc) {
      const int c = left + dc;
      const bool inside = r >= 0 && r < g.height && c >= 0 && c < g.width;
      out[dr * f + dc] = inside ? x(r, c) : 0.0;
    }
  }
}

Patch extract_patch(const Image& x, const PatchGeometry& g, int i) {
  Patch p(g.patch_size());
  extract_patch_into(x, g, i, p);
  return p;
}

void place_patch_accumulate(Image& acc, const PatchGeometry& g, int i, const Eigen::Ref<const Eigen::VectorXd>& p) {
  check_index(g, i);
  check_shape(acc, g);
  if (p.size() != g.patch_size()) throw std::invalid_argument("patch length does not match geometry");
  const int f = g.filter;
  const int top = i / g.grid_cols() - (f - 1);
  const int left = i % g.grid_cols() - (f - 1);
  const int r0 = std::max(0, -top), r1 = std::min(f, g.height - top);
  const int c0 = std::max(0, -left), c1 = std::min(f, g.width - left);
  for (int dr = r0; dr < r1; ++dr) {
    for (int dc = c0; dc < c1; ++dc) {
      acc(top + dr, left + dc) += p[dr * f + dc];
    }
  }
}

Eigen::MatrixXd extract_all(const Image& x, const PatchGeometry& g) {
  check_shape(x, g);
  Eigen::MatrixXd out(g.patch_size(), g.slice_count());
  for (int i = 0; i < g.slice_count(); ++i) {
    extract_patch_into(x, g, i, out.col(i));
  }
  return out;
}

Image aggregate(const Eigen::Ref<const Eigen::MatrixXd>& slices, const PatchGeometry& g) {
  if (slices.cols() != g.slice_count()) {
    throw std::invalid_argument("aggregate: expected " + std::to_string(g.slice_count()) + " slices, got " +
                                std::to_string(slices.cols()));
  }
  if (slices.rows() != g.patch_size()) throw std::invalid_argument("aggregate: slice length does not match geometry");
  Image acc(g.height, g.width);
  for (int i = 0; i < g.slice_count(); ++i) {
    place_patch_accumulate(acc, g, i, slices.col(i));
  }
  return acc;
}

Image aggregate(std::span<const Patch> slices, const PatchGeometry& g) {
  if (static_cast<int>(slices.size()) != g.slice_count()) {
    throw std::invalid_argument("aggregate: expected " + std::to_string(g.slice_count()) + " slices, got " +
                                std::to_string(slices.size()));
  }
  Image acc(g.height, g.width);
  for (int i = 0; i < g.slice_count(); ++i) {
    place_patch_accumulate(acc, g, i, slices[i]);
  }
  return acc;
}

double mean(const Image& x) { return x.vec().mean(); }

double population_stddev(const Image& x) {
  const double mu = mean(x);
  return std::sqrt((x.vec().array() - mu).square().mean());
}

PreprocessResult preprocess_with_status(const Image& x) {
  PreprocessResult res;
  res.mean = mean(x);
  res.image = x;
  res.image.vec().array() -= res.mean;
  res.stddev = std::sqrt(res.image.vec().squaredNorm() / static_cast<double>(x.size()));
  // Relative threshold: a constant image leaves only rounding noise after centering.
  const double scale = std::max(1.0, std::abs(res.mean));
  if (!(res.stddev > 1e-12 * scale)) {
    res.status = PreprocessStatus::constant_image;
    res.image.vec().setZero();
    return res;
  }
  res.image.vec() /= res.stddev;
  return res;
}

Image preprocess(const Image& x) { return preprocess_with_status(x).image; }

double psnr(const Image& x, const Image& x_hat) {
  if (!x.same_shape(x_hat)) throw std::invalid_argument("psnr: dimension mismatch");
  const double err = (x.vec() - x_hat.vec()).norm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(std::sqrt(static_cast<double>(x.size())) / err);
}

} // namespace slicedict
