#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "slicedict/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

using namespace slicedict;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "slicedict_test_io";
  fs::create_directories(dir);
  return dir / name;
}

RasterImage decode(const std::string& bytes) {
  std::istringstream in(bytes);
  return decode_pnm(in);
}

} // namespace

TEST_CASE("dictionary file layout") {
  const LocalDictionary d((Eigen::MatrixXd(1, 2) << 1.0, -1.0).finished());
  const std::vector<std::uint8_t> expect{'S', 'B', 'D', 'L', 1, 0, 1, 0, 2, 0, 0, 0,
                                         0, 0, 0, 0, 0, 0, 0xF0, 0x3F,   // 1.0
                                         0, 0, 0, 0, 0, 0, 0xF0, 0xBF};  // -1.0
  CHECK(encode_dictionary(d) == expect);
  CHECK(decode_dictionary(expect) == d);
}

TEST_CASE("dictionary round trip is bit exact") {
  const LocalDictionary d = init_dictionary(121, 100, 5);
  const fs::path p = scratch("d.sbdl");
  write_dictionary(p, d);
  CHECK(fs::file_size(p) == 12 + 8 * 121 * 100);
  const LocalDictionary back = read_dictionary(p);
  CHECK(back == d);
  CHECK(encode_dictionary(back) == encode_dictionary(d));
}

TEST_CASE("malformed dictionary files") {
  std::vector<std::uint8_t> good = encode_dictionary(init_dictionary(4, 2, 1));
  auto with = [&](std::size_t at, std::uint8_t v) {
    auto b = good;
    b[at] = v;
    return b;
  };
  CHECK_THROWS_AS(decode_dictionary(with(0, 'X')), IoError);
  CHECK_THROWS_AS(decode_dictionary(with(4, 2)), IoError);  // version
  CHECK_THROWS_AS(decode_dictionary(with(6, 3)), IoError);  // filter side changes payload size
  auto short_payload = good;
  short_payload.pop_back();
  CHECK_THROWS_AS(decode_dictionary(short_payload), IoError);
  CHECK_THROWS_AS(decode_dictionary({}), IoError);
  // scale the first atom: no longer unit norm
  auto scaled = good;
  double v;
  std::memcpy(&v, scaled.data() + 12, 8);
  v *= 2.0;
  std::memcpy(scaled.data() + 12, &v, 8);
  CHECK_THROWS_AS(decode_dictionary(scaled), IoError);
  CHECK_THROWS_AS(read_dictionary(scratch("missing.sbdl")), IoError);
}

TEST_CASE("pnm decoding") {
  SUBCASE("ascii gray with comments") {
    const RasterImage img = decode("P2\n# comment\n3 2\n# another\n4\n0 1 2\n3 4 0\n");
    CHECK(img.height == 2);
    CHECK(img.width == 3);
    CHECK(img.channels == 1);
    CHECK(img.data == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0, 0.0});
  }
  SUBCASE("binary gray and color") {
    const RasterImage g = decode(std::string("P5 2 1 255\n") + '\x00' + '\xff');
    CHECK(g.data == std::vector<double>{0.0, 1.0});
    const RasterImage c = decode(std::string("P6\n1 1\n255\n") + '\xff' + '\x00' + '\x33');
    CHECK(c.channels == 3);
    CHECK(c.data == std::vector<double>{1.0, 0.0, 0.2});
  }
  SUBCASE("sixteen bit samples are big endian") {
    const RasterImage g = decode(std::string("P5 1 1 65535\n") + '\x80' + '\x00');
    CHECK(g.data[0] == doctest::Approx(32768.0 / 65535.0));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(decode("P7 1 1 255\n"), IoError);
    CHECK_THROWS_AS(decode("hello"), IoError);
    CHECK_THROWS_AS(decode("P2 2 1 3\n1 4\n"), IoError);
    CHECK_THROWS_AS(decode(std::string("P5 2 2 255\n") + '\x01'), IoError);
    CHECK_THROWS_AS(decode("P2 0 1 255\n"), IoError);
    CHECK_THROWS_AS(read_pnm(scratch("missing.pgm")), IoError);
  }
}

TEST_CASE("pnm writing quantizes to eight bits") {
  Image gray(2, 2, std::vector<double>{0.0, 0.5, 1.2, -0.1});
  const fs::path p = scratch("g.pgm");
  write_pgm(p, gray);
  const RasterImage back = read_pnm(p);
  CHECK(back.data == std::vector<double>{0.0, 128.0 / 255.0, 1.0, 0.0});

  RasterImage color;
  color.height = 1;
  color.width = 2;
  color.channels = 3;
  color.data = {1.0, 0.0, 0.2, 0.4, 0.6, 0.8};
  write_pnm(scratch("c.ppm"), color);
  const RasterImage cback = read_pnm(scratch("c.ppm"));
  for (std::size_t k = 0; k < color.data.size(); ++k) CHECK(std::abs(cback.data[k] - color.data[k]) <= 0.5 / 255.0);
}

TEST_CASE("luma and gray rasters") {
  RasterImage c;
  c.height = c.width = 1;
  c.channels = 3;
  c.data = {1.0, 0.5, 0.0};
  CHECK(to_luma(c).pixels()[0] == doctest::Approx(0.299 + 0.5 * 0.587));
  const Image g(2, 3, 0.25);
  CHECK(to_luma(from_gray(g)) == g);
  CHECK(lightness(from_gray(g)) == g);
}

TEST_CASE("cielab") {
  const Lab white = srgb_to_lab(1.0, 1.0, 1.0);
  CHECK(std::abs(white.l - 100.0) < 1e-3);
  CHECK(std::abs(white.a) < 1e-3);
  CHECK(std::abs(white.b) < 1e-3);
  const Lab black = srgb_to_lab(0.0, 0.0, 0.0);
  CHECK(std::abs(black.l) < 1e-9);
  // sRGB red under D65, from the standard conversion tables
  const Lab red = srgb_to_lab(1.0, 0.0, 0.0);
  CHECK(red.l == doctest::Approx(53.2408).epsilon(1e-3));
  CHECK(red.a == doctest::Approx(80.0925).epsilon(1e-3));
  CHECK(red.b == doctest::Approx(67.2032).epsilon(1e-3));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double r = u(rng), g = u(rng), b = u(rng);
    double r2, g2, b2;
    lab_to_srgb(srgb_to_lab(r, g, b), r2, g2, b2);
    CHECK(std::abs(r - r2) < 1e-9);
    CHECK(std::abs(g - g2) < 1e-9);
    CHECK(std::abs(b - b2) < 1e-9);
  }
}

TEST_CASE("lightness replacement keeps chroma") {
  RasterImage c;
  c.height = 1;
  c.width = 2;
  c.channels = 3;
  c.data = {0.8, 0.3, 0.1, 0.2, 0.5, 0.9};
  const Image light = lightness(c);
  const RasterImage same = with_lightness(c, light);
  for (std::size_t k = 0; k < c.data.size(); ++k) CHECK(std::abs(same.data[k] - c.data[k]) < 1e-9);

  Image brighter = light;
  brighter.vec().array() += 0.05;
  const RasterImage out = with_lightness(c, brighter);
  const Lab before = srgb_to_lab(c.data[0], c.data[1], c.data[2]);
  const Lab after = srgb_to_lab(out.data[0], out.data[1], out.data[2]);
  CHECK(after.l == doctest::Approx(before.l + 5.0).epsilon(1e-6));
  CHECK(after.a == doctest::Approx(before.a).epsilon(1e-6));
  CHECK_THROWS_AS(with_lightness(c, Image(2, 1)), std::invalid_argument);
}

TEST_CASE("dictionary mosaic") {
  const Image m = dictionary_mosaic(init_dictionary(9, 4, 1));
  // 2 x 2 grid of 3 x 3 tiles framed by 1 px separators
  CHECK(m.height() == 9);
  CHECK(m.width() == 9);
  CHECK(m(0, 0) == 1.0);
  for (double v : m.pixels()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("metrics csv") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(format_double(3.0) == "3");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);

  MetricsRow row;
  row.iteration = 7;
  row.data_term = 1.5;
  row.l1_term = 0.25;
  row.objective = 1.75;
  row.slice_data_term = 0.125;
  row.max_primal_residual = 1e-4;
  row.time_ms = 12.0;
  CHECK(format_metrics_row(row) == "7,1.5,0.25,1.75,0.125,1e-04,12");

  const fs::path p = scratch("m.csv");
  {
    MetricsCsvWriter w(p);
    w.write(row);
  }
  std::ifstream in(p);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "iter,data_term,l1_term,objective,slice_data_term,max_primal_residual,time_ms");
  CHECK(line == "7,1.5,0.25,1.75,0.125,1e-04,12");
}
