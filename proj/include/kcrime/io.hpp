#pragma once

// File formats.
//
// Binary container (all integers and floats little-endian):
//   char[4]  magic "KCRB"
//   u32      version (1)
//   u32      mode    (0 discrete, 1 bandlimited, 2 analytic, 3 none)
//   u32      ndims, then u32 dims[ndims]
//   u32      coils
//   i32      order   (coil series order, -1 if none)
//   u32      array count, then per array:
//     u32 name length, name bytes
//     u32 dtype (1 float64, 2 complex64, 3 complex128)
//     u32 rank, then u64 shape[rank]
//     row-major payload (complex as re, im pairs)
//
// PGM previews are 8-bit P5. Log previews map log10|v| over the window
// [max - decades, max] onto 0..255 and record the window in a comment.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "kcrime/coils.hpp"
#include "kcrime/dft.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"
#include "kcrime/kernel.hpp"
#include "kcrime/phantom.hpp"

namespace kcrime {

enum class DType : std::uint32_t { f64 = 1, c64 = 2, c128 = 3 };
enum class ContainerMode : std::uint32_t { discrete = 0, bandlimited = 1, analytic = 2, none = 3 };

struct ContainerArray {
  std::string name;
  DType dtype = DType::c128;
  std::vector<std::uint64_t> shape;
  std::vector<double> real;  // f64 payload
  CArray complex;            // c64 / c128 payload

  std::uint64_t count() const {
    std::uint64_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

struct Container {
  ContainerMode mode = ContainerMode::none;
  std::vector<int> dims;
  int coils = 1;
  int order = -1;
  std::vector<ContainerArray> arrays;

  const ContainerArray* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }
  const ContainerArray& get(const std::string& name) const {
    if (const auto* a = find(name)) return *a;
    throw UsageError("container has no array '" + name + "'");
  }
};

namespace detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& os) : os_(os) {}
  void u32(std::uint32_t v) { bytes(v, 4); }
  void i32(std::int32_t v) { bytes(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f32(float v) { bytes(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { bytes(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const std::string& s) { os_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  void bytes(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os_.write(buf, n);
  }
  std::ostream& os_;
};

class LeReader {
 public:
  LeReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(bytes(4))); }
  std::uint64_t u64() { return bytes(8); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(bytes(4))); }
  double f64() { return std::bit_cast<double>(bytes(8)); }
  std::string raw(std::size_t n) {
    std::string s(n, '\0');
    if (!is_.read(s.data(), static_cast<std::streamsize>(n))) fail("truncated file");
    return s;
  }
  [[noreturn]] void fail(const std::string& what) const { throw UsageError(source_ + ": " + what); }

 private:
  std::uint64_t bytes(int n) {
    unsigned char buf[8];
    if (!is_.read(reinterpret_cast<char*>(buf), n)) fail("truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& is_;
  std::string source_;
};

}  // namespace detail

inline void write_container(const std::string& path, const Container& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path);
  detail::LeWriter w(os);
  w.raw("KCRB");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(c.mode));
  w.u32(static_cast<std::uint32_t>(c.dims.size()));
  for (int d : c.dims) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(c.coils));
  w.i32(c.order);
  w.u32(static_cast<std::uint32_t>(c.arrays.size()));
  for (const auto& a : c.arrays) {
    w.u32(static_cast<std::uint32_t>(a.name.size()));
    w.raw(a.name);
    w.u32(static_cast<std::uint32_t>(a.dtype));
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto s : a.shape) w.u64(s);
    const auto n = a.count();
    if (a.dtype == DType::f64) {
      if (a.real.size() != n) throw UsageError("array '" + a.name + "' payload does not match its shape");
      for (double v : a.real) w.f64(v);
    } else {
      if (a.complex.size() != n) throw UsageError("array '" + a.name + "' payload does not match its shape");
      for (const auto& v : a.complex) {
        if (a.dtype == DType::c64) {
          w.f32(static_cast<float>(v.real()));
          w.f32(static_cast<float>(v.imag()));
        } else {
          w.f64(v.real());
          w.f64(v.imag());
        }
      }
    }
  }
  if (!os) throw UsageError("write failed for " + path);
}

inline Container read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read " + path);
  detail::LeReader r(is, path);
  if (r.raw(4) != "KCRB") r.fail("not a kcrime container (bad magic)");
  if (const auto v = r.u32(); v != 1) r.fail("unsupported container version " + std::to_string(v));
  Container c;
  const auto mode = r.u32();
  if (mode > 3) r.fail("unknown mode " + std::to_string(mode));
  c.mode = static_cast<ContainerMode>(mode);
  const auto nd = r.u32();
  if (nd == 0 || nd > 8) r.fail("implausible dimension count " + std::to_string(nd));
  for (std::uint32_t i = 0; i < nd; ++i) c.dims.push_back(static_cast<int>(r.u32()));
  c.coils = static_cast<int>(r.u32());
  c.order = r.i32();
  const auto count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    ContainerArray a;
    a.name = r.raw(r.u32());
    const auto dt = r.u32();
    if (dt < 1 || dt > 3) r.fail("array '" + a.name + "' has unknown dtype " + std::to_string(dt));
    a.dtype = static_cast<DType>(dt);
    const auto rank = r.u32();
    if (rank > 8) r.fail("array '" + a.name + "' has implausible rank");
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(r.u64());
    const auto n = a.count();
    if (n > (std::uint64_t{1} << 32)) r.fail("array '" + a.name + "' is implausibly large");
    if (a.dtype == DType::f64) {
      a.real.resize(n);
      for (auto& v : a.real) v = r.f64();
    } else {
      a.complex.resize(n);
      for (auto& v : a.complex) {
        if (a.dtype == DType::c64) {
          const float re = r.f32();
          const float im = r.f32();
          v = {re, im};
        } else {
          const double re = r.f64();
          const double im = r.f64();
          v = {re, im};
        }
      }
    }
    c.arrays.push_back(std::move(a));
  }
  return c;
}

namespace detail {

inline std::vector<std::uint64_t> coil_shape(const GridSpec& g) {
  std::vector<std::uint64_t> s{static_cast<std::uint64_t>(g.coils)};
  for (int d : g.dims) s.push_back(static_cast<std::uint64_t>(d));
  return s;
}

inline CArray flatten(const std::vector<CArray>& per_coil) {
  CArray out;
  for (const auto& a : per_coil) out.insert(out.end(), a.begin(), a.end());
  return out;
}

inline std::vector<CArray> unflatten(const CArray& flat, const GridSpec& g) {
  const auto n = static_cast<std::size_t>(g.locations());
  if (flat.size() != n * static_cast<std::size_t>(g.coils)) throw UsageError("array does not match the grid");
  std::vector<CArray> out;
  for (int j = 0; j < g.coils; ++j)
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(j * n),
                     flat.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
  return out;
}

}  // namespace detail

inline void save_coils(const std::string& path, const CoilModel& coils, DType dtype = DType::c128) {
  Container c;
  c.mode = coils.mode == CoilMode::bandlimited ? ContainerMode::bandlimited : ContainerMode::discrete;
  c.dims = coils.grid.dims;
  c.coils = coils.grid.coils;
  c.order = coils.order;
  c.arrays.push_back({"maps", dtype, detail::coil_shape(coils.grid), {}, detail::flatten(coils.maps)});
  if (coils.mode == CoilMode::bandlimited) {
    std::vector<std::uint64_t> shape{static_cast<std::uint64_t>(coils.grid.coils)};
    for (std::size_t d = 0; d < coils.grid.ndims(); ++d) shape.push_back(static_cast<std::uint64_t>(2 * coils.order + 1));
    c.arrays.push_back({"coefficients", DType::c128, shape, {}, detail::flatten(coils.coefficients)});
  }
  write_container(path, c);
}

inline CoilModel load_coils(const std::string& path) {
  const auto c = read_container(path);
  GridSpec grid(c.dims, c.coils);
  if (c.mode == ContainerMode::bandlimited) {
    const auto& coeff = c.get("coefficients");
    const auto per = coeff.complex.size() / static_cast<std::size_t>(c.coils);
    std::vector<CArray> sets;
    for (int j = 0; j < c.coils; ++j)
      sets.emplace_back(coeff.complex.begin() + static_cast<std::ptrdiff_t>(j * per),
                        coeff.complex.begin() + static_cast<std::ptrdiff_t>((j + 1) * per));
    return bandlimited_coils(grid, c.order, std::move(sets));
  }
  if (c.mode != ContainerMode::discrete) throw UsageError(path + " does not hold coil maps");
  return coils_from_maps(grid, detail::unflatten(c.get("maps").complex, grid));
}

inline void save_truth(const std::string& path, const GroundTruth& gt, DType dtype = DType::c128) {
  Container c;
  c.mode = gt.mode == PhantomMode::discrete ? ContainerMode::discrete : ContainerMode::analytic;
  c.dims = gt.grid.dims;
  c.coils = gt.grid.coils;
  c.arrays.push_back({"kspace", dtype, detail::coil_shape(gt.grid), {}, detail::flatten(gt.coil_kspace)});
  if (gt.rho) {
    std::vector<std::uint64_t> shape(gt.grid.dims.begin(), gt.grid.dims.end());
    c.arrays.push_back({"rho", DType::c128, shape, {}, *gt.rho});
  }
  c.arrays.push_back({"rho_l2", DType::f64, {1}, {gt.rho_l2}, {}});
  write_container(path, c);
}

inline GroundTruth load_truth(const std::string& path) {
  const auto c = read_container(path);
  if (c.mode != ContainerMode::discrete && c.mode != ContainerMode::analytic)
    throw UsageError(path + " does not hold a ground truth");
  GroundTruth gt;
  gt.grid = GridSpec(c.dims, c.coils);
  gt.mode = c.mode == ContainerMode::discrete ? PhantomMode::discrete : PhantomMode::analytic;
  gt.coil_kspace = detail::unflatten(c.get("kspace").complex, gt.grid);
  if (const auto* rho = c.find("rho")) gt.rho = rho->complex;
  gt.rho_l2 = c.get("rho_l2").real.at(0);
  return gt;
}

inline void save_matrix(const std::string& path, const Matrix& m, const GridSpec& grid, DType dtype = DType::c128) {
  Container c;
  c.dims = grid.dims;
  c.coils = grid.coils;
  ContainerArray a{"matrix", dtype, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}, {}};
  a.complex.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) a.complex.push_back(m(i, j));
  c.arrays.push_back(std::move(a));
  write_container(path, c);
}

inline Matrix load_matrix(const std::string& path) {
  const auto c = read_container(path);
  const auto& a = c.get("matrix");
  if (a.shape.size() != 2) throw UsageError(path + ": matrix array must have rank 2");
  Matrix m(static_cast<Index>(a.shape[0]), static_cast<Index>(a.shape[1]));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = a.complex[static_cast<std::size_t>(i * m.cols() + j)];
  return m;
}

/// Debug export; refuses anything bigger than 256x256.
inline void save_matrix_csv(const std::string& path, const Matrix& m) {
  if (m.rows() > 256 || m.cols() > 256) throw UsageError("CSV export is limited to 256x256 matrices");
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  os.precision(17);
  os << "row,col,re,im\n";
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) os << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag() << '\n';
}

struct PgmWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool log = true;
};

/// Writes a 2D nonnegative map as 8-bit PGM. `dims` gives (rows, cols); extra
/// dimensions are folded into columns. With `center`, the array is circularly
/// shifted so index 0 lands in the middle (k-space DC / image origin).
inline PgmWindow write_pgm(const std::string& path, const std::vector<double>& values, const std::vector<int>& dims,
                           bool log = true, double decades = 6.0, bool center = true) {
  const int rows = dims.at(0);
  const int cols = static_cast<int>(values.size()) / rows;
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, v);
  PgmWindow win;
  win.log = log;
  if (log) {
    win.hi = vmax > 0.0 ? std::log10(vmax) : 0.0;
    win.lo = win.hi - decades;
  } else {
    win.hi = vmax;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path);
  os << "P5\n# " << (log ? "log10" : "linear") << " window [" << win.lo << ", " << win.hi << "]\n"
     << cols << ' ' << rows << "\n255\n";
  std::string buf(static_cast<std::size_t>(rows) * cols, '\0');
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int sr = center ? (r + (rows + 1) / 2) % rows : r;
      const int sc = center ? (c + (cols + 1) / 2) % cols : c;
      const double v = values[static_cast<std::size_t>(sr) * cols + sc];
      double t;
      if (log)
        t = v > 0.0 ? (std::log10(v) - win.lo) / decades : 0.0;
      else
        t = win.hi > 0.0 ? v / win.hi : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      buf[static_cast<std::size_t>(r) * cols + c] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t)));
    }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  return win;
}

inline std::vector<double> magnitude(const CArray& a) {
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = std::abs(a[i]);
  return m;
}

}  // namespace kcrime
