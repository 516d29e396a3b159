#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "kcrime/io.hpp"

using namespace kcrime;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "kcrime-io-tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(Container, RoundTripsEveryDtype) {
  Container c;
  c.mode = ContainerMode::analytic;
  c.dims = {3, 2};
  c.coils = 2;
  c.order = 1;
  c.arrays.push_back({"r", DType::f64, {2, 3}, {1.5, -2.0, 0.0, 1e-300, 7.0, 3.25}, {}});
  c.arrays.push_back({"z", DType::c128, {3}, {}, {{1.0, 2.0}, {-0.1, 1e-17}, {3.0, -4.0}}});
  c.arrays.push_back({"h", DType::c64, {2}, {}, {{0.5, 0.25}, {-1.0, 2.0}}});
  const auto path = scratch("roundtrip.kcb").string();
  write_container(path, c);
  const auto back = read_container(path);
  EXPECT_EQ(back.mode, ContainerMode::analytic);
  EXPECT_EQ(back.dims, c.dims);
  EXPECT_EQ(back.coils, 2);
  EXPECT_EQ(back.order, 1);
  EXPECT_EQ(back.get("r").real, c.arrays[0].real);
  EXPECT_EQ(back.get("z").complex, c.arrays[1].complex);
  EXPECT_EQ(back.get("h").complex, c.arrays[2].complex);  // exactly representable in float
  EXPECT_EQ(back.get("r").shape, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_THROW(back.get("missing"), UsageError);
}

TEST(Container, HeaderIsLittleEndian) {
  Container c;
  c.dims = {4, 4};
  c.coils = 3;
  const auto path = scratch("header.kcb");
  write_container(path.string(), c);
  const auto bytes = slurp(path);
  ASSERT_GE(bytes.size(), 36u);
  EXPECT_EQ(bytes.substr(0, 4), "KCRB");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[12], 2);  // ndims after the mode word
  EXPECT_EQ(bytes[16], 4);
  EXPECT_EQ(bytes[24], 3);  // coils
}

TEST(Container, RejectsCorruptFiles) {
  const auto bad = scratch("bad.kcb");
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOPE0000";
  }
  EXPECT_THROW(read_container(bad.string()), UsageError);

  Container c;
  c.dims = {2, 2};
  c.arrays.push_back({"z", DType::c128, {4}, {}, CArray(4, Complex{1.0, 1.0})});
  const auto good = scratch("trunc.kcb");
  write_container(good.string(), c);
  auto bytes = slurp(good);
  bytes.resize(bytes.size() - 5);
  {
    std::ofstream os(good, std::ios::binary);
    os << bytes;
  }
  EXPECT_THROW(read_container(good.string()), UsageError);
  EXPECT_THROW(read_container(scratch("absent.kcb").string()), UsageError);
}

TEST(Container, RejectsPayloadShapeMismatch) {
  Container c;
  c.dims = {2, 2};
  c.arrays.push_back({"z", DType::c128, {5}, {}, CArray(4)});
  EXPECT_THROW(write_container(scratch("mismatch.kcb").string(), c), UsageError);
}

TEST(CoilFile, BandlimitedRoundTrip) {
  const auto c = make_coils(GridSpec({16, 16}, 3), 2, 5);
  const auto path = scratch("coils.kcb").string();
  save_coils(path, c);
  const auto back = load_coils(path);
  EXPECT_EQ(back.grid, c.grid);
  EXPECT_EQ(back.mode, CoilMode::bandlimited);
  EXPECT_EQ(back.order, 2);
  EXPECT_EQ(back.coefficients, c.coefficients);
  EXPECT_EQ(back.maps, c.maps);
}

TEST(CoilFile, DiscreteRoundTrip) {
  const GridSpec g({2, 3}, 1);
  const auto c = coils_from_maps(g, {CArray{1.0, 2.0, Complex(0, 1), 0.5, 0.25, -1.0}});
  const auto path = scratch("dcoils.kcb").string();
  save_coils(path, c);
  const auto back = load_coils(path);
  EXPECT_EQ(back.mode, CoilMode::discrete);
  EXPECT_EQ(back.maps, c.maps);
}

TEST(TruthFile, RoundTripBothModes) {
  const auto c = make_coils(GridSpec({8, 8}, 2), 1, 2);
  for (const auto& gt : {make_phantom_discrete(c, 3, 2), make_phantom_analytic(c, default_ellipses())}) {
    const auto path = scratch("truth.kcb").string();
    save_truth(path, gt);
    const auto back = load_truth(path);
    EXPECT_EQ(back.grid, gt.grid);
    EXPECT_EQ(back.mode, gt.mode);
    EXPECT_EQ(back.coil_kspace, gt.coil_kspace);
    EXPECT_EQ(back.rho_l2, gt.rho_l2);
    EXPECT_EQ(back.rho.has_value(), gt.rho.has_value());
    if (gt.rho) {
      EXPECT_EQ(*back.rho, *gt.rho);
    }
  }
}

TEST(MatrixFile, RoundTripAndCsvLimit) {
  Matrix m(3, 2);
  m << Complex(1, 2), Complex(3, 4), Complex(-5, 0), Complex(0, 6), Complex(7, -8), Complex(1e-20, 9);
  const auto path = scratch("m.kcb").string();
  save_matrix(path, m, GridSpec({2, 2}, 1));
  EXPECT_EQ(load_matrix(path), m);
  save_matrix_csv(scratch("m.csv").string(), m);
  const auto csv = slurp(scratch("m.csv"));
  EXPECT_EQ(csv.substr(0, 14), "row,col,re,im\n");
  EXPECT_THROW(save_matrix_csv(scratch("big.csv").string(), Matrix::Zero(300, 2)), UsageError);
}

TEST(Pgm, LogWindowSpansSixDecades) {
  const std::vector<double> v{1e3, 1e-3, 1.0, 0.0};
  const auto path = scratch("w.pgm");
  const auto win = write_pgm(path.string(), v, {2, 2}, true, 6.0, false);
  EXPECT_DOUBLE_EQ(win.hi, 3.0);
  EXPECT_DOUBLE_EQ(win.lo, -3.0);
  const auto bytes = slurp(path);
  EXPECT_EQ(bytes.substr(0, 3), "P5\n");
  EXPECT_NE(bytes.find("log10 window [-3, 3]"), std::string::npos);
  const auto pix = bytes.substr(bytes.size() - 4);
  EXPECT_EQ(static_cast<unsigned char>(pix[0]), 255);  // max
  EXPECT_EQ(static_cast<unsigned char>(pix[1]), 0);    // bottom of window
  EXPECT_EQ(static_cast<unsigned char>(pix[2]), 128);  // mid-window
  EXPECT_EQ(static_cast<unsigned char>(pix[3]), 0);    // zero clamps
}

TEST(Pgm, CenteringMovesOriginToMiddle) {
  std::vector<double> v(16, 0.0);
  v[0] = 1.0;
  const auto path = scratch("c.pgm");
  write_pgm(path.string(), v, {4, 4}, false, 6.0, true);
  const auto bytes = slurp(path);
  const auto pix = bytes.substr(bytes.size() - 16);
  EXPECT_EQ(static_cast<unsigned char>(pix[2 * 4 + 2]), 255);
  EXPECT_EQ(static_cast<unsigned char>(pix[0]), 0);
}
