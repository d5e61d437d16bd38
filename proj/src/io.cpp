#include "slicedict/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

namespace slicedict {

namespace {

void skip_space_and_comments(std::istream& in) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (ch != EOF && std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& in, const char* what) {
  skip_space_and_comments(in);
  long long v = -1;
  if (!(in >> v) || v < 0 || v > std::numeric_limits<int>::max()) {
    throw IoError(std::string("pnm: bad ") + what);
  }
  return static_cast<int>(v);
}

} // namespace

RasterImage decode_pnm(std::istream& in) {
  char magic[2] = {0, 0};
  if (!in.read(magic, 2) || magic[0] != 'P') throw IoError("pnm: missing magic number");
  const char kind = magic[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw IoError(std::string("pnm: unsupported format P") + kind);
  }
  RasterImage img;
  img.width = read_header_int(in, "width");
  img.height = read_header_int(in, "height");
  const int maxval = read_header_int(in, "maxval");
  if (img.width < 1 || img.height < 1) throw IoError("pnm: empty image");
  if (maxval < 1 || maxval > 65535) throw IoError("pnm: maxval out of range");
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.data.resize(count);
  const double scale = 1.0 / maxval;

  if (kind == '2' || kind == '3') {
    for (std::size_t k = 0; k < count; ++k) {
      const int v = read_header_int(in, "sample");
      if (v > maxval) throw IoError("pnm: sample exceeds maxval");
      img.data[k] = v * scale;
    }
    return img;
  }

  in.get();  // single whitespace after maxval
  const int bytes_per_sample = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(count * bytes_per_sample);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("pnm: truncated pixel data");
  }
  for (std::size_t k = 0; k < count; ++k) {
    const int v = bytes_per_sample == 1 ? raw[k] : (raw[2 * k] << 8) | raw[2 * k + 1];
    if (v > maxval) throw IoError("pnm: sample exceeds maxval");
    img.data[k] = v * scale;
  }
  return img;
}

RasterImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return decode_pnm(in);
}

void write_pnm(const std::filesystem::path& path, const RasterImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const double v = std::clamp(img.data[k], 0.0, 1.0);
    raw[k] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

RasterImage from_gray(const Image& gray) {
  RasterImage img;
  img.height = gray.height();
  img.width = gray.width();
  img.channels = 1;
  img.data.assign(gray.pixels().begin(), gray.pixels().end());
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& gray) { write_pnm(path, from_gray(gray)); }

Image to_luma(const RasterImage& img) {
  Image out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      out(r, c) = img.channels == 1
                      ? img.at(r, c, 0)
                      : 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// sRGB <-> CIELAB, D65
// ---------------------------------------------------------------------------

namespace {

const Eigen::Matrix3d& rgb_to_xyz() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.4124564, 0.3575761, 0.1804375,  //
                                    0.2126729, 0.7151522, 0.0721750,                        //
                                    0.0193339, 0.1191920, 0.9503041)
                                       .finished();
  return m;
}

const Eigen::Matrix3d& xyz_to_rgb() {
  static const Eigen::Matrix3d m = rgb_to_xyz().inverse();
  return m;
}

// reference white as the image of sRGB (1, 1, 1), so white maps to a = b = 0 exactly
const Eigen::Vector3d& white() {
  static const Eigen::Vector3d w = rgb_to_xyz() * Eigen::Vector3d::Ones();
  return w;
}

constexpr double kDelta = 6.0 / 29.0;

double srgb_decode(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double srgb_encode(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055; }
double lab_f(double t) { return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0; }
double lab_f_inv(double t) { return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0); }

} // namespace

Lab srgb_to_lab(double r, double g, double b) {
  const Eigen::Vector3d xyz = rgb_to_xyz() * Eigen::Vector3d(srgb_decode(r), srgb_decode(g), srgb_decode(b));
  const double fx = lab_f(xyz[0] / white()[0]);
  const double fy = lab_f(xyz[1] / white()[1]);
  const double fz = lab_f(xyz[2] / white()[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void lab_to_srgb(const Lab& lab, double& r, double& g, double& b) {
  const double fy = (lab.l + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const Eigen::Vector3d xyz(white()[0] * lab_f_inv(fx), white()[1] * lab_f_inv(fy), white()[2] * lab_f_inv(fz));
  const Eigen::Vector3d rgb = xyz_to_rgb() * xyz;
  r = srgb_encode(rgb[0]);
  g = srgb_encode(rgb[1]);
  b = srgb_encode(rgb[2]);
}

Image lightness(const RasterImage& img) {
  if (img.channels == 1) return to_luma(img);
  Image out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      out(r, c) = srgb_to_lab(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2)).l / 100.0;
    }
  }
  return out;
}

RasterImage with_lightness(const RasterImage& img, const Image& light) {
  if (light.height() != img.height || light.width() != img.width) {
    throw std::invalid_argument("lightness plane does not match the raster");
  }
  RasterImage out = img;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (img.channels == 1) {
        out.at(r, c, 0) = light(r, c);
        continue;
      }
      Lab lab = srgb_to_lab(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2));
      lab.l = 100.0 * light(r, c);
      lab_to_srgb(lab, out.at(r, c, 0), out.at(r, c, 1), out.at(r, c, 2));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary file
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t offset) {
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(in[offset + k]) << (8 * k);
  return v;
}

constexpr std::size_t kHeaderBytes = 12;

} // namespace

std::vector<std::uint8_t> encode_dictionary(const LocalDictionary& d) {
  const int f = d.filter_side();
  if (f > 0xFFFF) throw IoError("dictionary filter side does not fit the file format");
  std::vector<std::uint8_t> out{'S', 'B', 'D', 'L'};
  out.reserve(kHeaderBytes + 8 * static_cast<std::size_t>(d.patch_size()) * d.atom_count());
  put_le<std::uint16_t>(out, kDictionaryFormatVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(f));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.atom_count()));
  for (int j = 0; j < d.atom_count(); ++j) {
    for (int r = 0; r < d.patch_size(); ++r) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(d.atoms()(r, j)));
  }
  return out;
}

LocalDictionary decode_dictionary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes || bytes[0] != 'S' || bytes[1] != 'B' || bytes[2] != 'D' || bytes[3] != 'L') {
    throw IoError("dictionary file: bad magic");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kDictionaryFormatVersion) throw IoError("dictionary file: unsupported version " + std::to_string(version));
  const int f = get_le<std::uint16_t>(bytes, 6);
  const auto m = get_le<std::uint32_t>(bytes, 8);
  if (f < 1 || m < 1) throw IoError("dictionary file: empty dictionary");
  const std::size_t n = static_cast<std::size_t>(f) * f;
  if (bytes.size() != kHeaderBytes + 8 * n * m) throw IoError("dictionary file: payload length mismatch");

  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  std::size_t offset = kHeaderBytes;
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    for (Eigen::Index r = 0; r < atoms.rows(); ++r, offset += 8) {
      atoms(r, j) = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
    }
    if (!atoms.col(j).allFinite() || std::abs(atoms.col(j).norm() - 1.0) > 1e-8) {
      throw IoError("dictionary file: atom " + std::to_string(j) + " is not unit norm");
    }
  }
  // stored atoms pass the 1e-8 file check; the in-memory type checks at 1e-10
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    if (std::abs(atoms.col(j).norm() - 1.0) > 1e-10) atoms.col(j).normalize();
  }
  return LocalDictionary(std::move(atoms));
}

void write_dictionary(const std::filesystem::path& path, const LocalDictionary& d) {
  const auto bytes = encode_dictionary(d);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

LocalDictionary read_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dictionary(bytes);
}

Image dictionary_mosaic(const LocalDictionary& d) {
  const int f = d.filter_side();
  const int m = d.atom_count();
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const int rows = (m + cols - 1) / cols;
  Image out(rows * (f + 1) + 1, cols * (f + 1) + 1, 1.0);
  for (int j = 0; j < m; ++j) {
    const auto atom = d.atom(j);
    const double lo = atom.minCoeff(), hi = atom.maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    const int top = 1 + (j / cols) * (f + 1);
    const int left = 1 + (j % cols) * (f + 1);
    for (int r = 0; r < f; ++r) {
      for (int c = 0; c < f; ++c) out(top + r, left + c) = (atom[r * f + c] - lo) / span;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string format_metrics_row(const MetricsRow& row) {
  std::string s = std::to_string(row.iteration);
  for (double v : {row.data_term, row.l1_term, row.objective, row.slice_data_term, row.max_primal_residual,
                   row.time_ms}) {
    s += ',';
    s += format_double(v);
  }
  return s;
}

MetricsCsvWriter::MetricsCsvWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw IoError("cannot write " + path.string());
  out_ << kMetricsHeader << '\n';
  out_.flush();
}

void MetricsCsvWriter::write(const MetricsRow& row) {
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
}

} // namespace slicedict
