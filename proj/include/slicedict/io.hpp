#pragma once

#include "slicedict/dictionary.hpp"
#include "slicedict/engine.hpp"
#include "slicedict/image.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace slicedict {

inline constexpr const char* kVersion = "0.1.0";

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Portable any-map images (P2/P3 ASCII, P5/P6 binary, maxval up to 65535).
// Samples are scaled to [0, 1].
// ---------------------------------------------------------------------------

struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 1;           // 1 (gray) or 3 (RGB)
  std::vector<double> data;   // interleaved, row-major

  bool is_color() const { return channels == 3; }
  double& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
  double at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
};

RasterImage read_pnm(const std::filesystem::path& path);
RasterImage decode_pnm(std::istream& in);
/// Binary 8-bit P5/P6, values clamped to [0, 1] and rounded.
void write_pnm(const std::filesystem::path& path, const RasterImage& img);
void write_pgm(const std::filesystem::path& path, const Image& gray);

RasterImage from_gray(const Image& gray);

/// ITU-R BT.601 luma; gray rasters pass through.
Image to_luma(const RasterImage& img);

struct Lab {
  double l, a, b;
};

/// sRGB in [0, 1] to CIELAB (D65 white), and back.
Lab srgb_to_lab(double r, double g, double b);
void lab_to_srgb(const Lab& lab, double& r, double& g, double& b);

/// L channel / 100 for color rasters, the gray plane otherwise.
Image lightness(const RasterImage& img);
/// Replaces lightness (scaled as returned by lightness()) keeping a/b chroma.
RasterImage with_lightness(const RasterImage& img, const Image& light);

// ---------------------------------------------------------------------------
// Dictionary file: "SBDL", u16 version, u16 filter side, u32 atom count, then
// f*f*m little-endian doubles, atom by atom.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kDictionaryFormatVersion = 1;

std::vector<std::uint8_t> encode_dictionary(const LocalDictionary& d);
LocalDictionary decode_dictionary(const std::vector<std::uint8_t>& bytes);
void write_dictionary(const std::filesystem::path& path, const LocalDictionary& d);
LocalDictionary read_dictionary(const std::filesystem::path& path);

/// Atoms tiled on a near-square grid, each min-max normalized, 1 px white separators.
Image dictionary_mosaic(const LocalDictionary& d);

// ---------------------------------------------------------------------------
// Metrics CSV.
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "iter,data_term,l1_term,objective,slice_data_term,max_primal_residual,time_ms";

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_double(double v);
std::string format_metrics_row(const MetricsRow& row);

class MetricsCsvWriter {
public:
  explicit MetricsCsvWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

private:
  std::ofstream out_;
};

} // namespace slicedict
