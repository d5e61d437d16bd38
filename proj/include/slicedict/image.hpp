#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace slicedict {

/// Single grayscale plane, row-major, double precision.
class Image {
public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);
  Image(int height, int width, std::vector<double> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& operator()(int r, int c) { return pixels_[static_cast<std::size_t>(r) * width_ + c]; }
  double operator()(int r, int c) const { return pixels_[static_cast<std::size_t>(r) * width_ + c]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  Eigen::Map<Eigen::VectorXd> vec() { return {pixels_.data(), static_cast<Eigen::Index>(pixels_.size())}; }
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {pixels_.data(), static_cast<Eigen::Index>(pixels_.size())};
  }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;

  friend bool operator==(const Image&, const Image&) = default;

private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

/// Geometry of the slice grid over an image zero-padded by f-1 on every side.
///
/// Slice i sits at grid position (i / grid_cols, i % grid_cols); that position is
/// the top-left corner of an f x f patch in padded coordinates, so it covers image
/// rows [r - (f-1), r] and columns [c - (f-1), c]. Each original pixel is then
/// covered by exactly n = f*f patches.
struct PatchGeometry {
  int height = 0;
  int width = 0;
  int filter = 1;

  PatchGeometry() = default;
  PatchGeometry(int height, int width, int filter);
  static PatchGeometry for_image(const Image& x, int filter) { return {x.height(), x.width(), filter}; }

  int patch_size() const { return filter * filter; }
  int grid_rows() const { return height + filter - 1; }
  int grid_cols() const { return width + filter - 1; }
  int slice_count() const { return grid_rows() * grid_cols(); }
  int pixel_count() const { return height * width; }

  friend bool operator==(const PatchGeometry&, const PatchGeometry&) = default;
};

using Patch = Eigen::VectorXd;

/// R_i M^T x: f x f block at slice position i, zero outside the image.
Patch extract_patch(const Image& x, const PatchGeometry& g, int i);
void extract_patch_into(const Image& x, const PatchGeometry& g, int i, Eigen::Ref<Eigen::VectorXd> out);

/// acc += M R_i^T p (adjoint of extract_patch).
void place_patch_accumulate(Image& acc, const PatchGeometry& g, int i, const Eigen::Ref<const Eigen::VectorXd>& p);

/// All patches as columns of an n x N_s matrix.
Eigen::MatrixXd extract_all(const Image& x, const PatchGeometry& g);

/// Sum_j M R_j^T p_j over the columns of `slices` (n x N_s), summed in index order.
Image aggregate(const Eigen::Ref<const Eigen::MatrixXd>& slices, const PatchGeometry& g);
Image aggregate(std::span<const Patch> slices, const PatchGeometry& g);

enum class PreprocessStatus { ok, constant_image };

struct PreprocessResult {
  Image image;
  PreprocessStatus status = PreprocessStatus::ok;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Mean subtraction followed by division by the population standard deviation.
/// Constant images are only mean-subtracted.
PreprocessResult preprocess_with_status(const Image& x);
Image preprocess(const Image& x);

double mean(const Image& x);
double population_stddev(const Image& x);

/// 20 log10(sqrt(N) / ||x - x_hat||_2); +infinity when the images agree exactly.
double psnr(const Image& x, const Image& x_hat);

} // namespace slicedict
