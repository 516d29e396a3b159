#pragma once

// Cartesian k-space grids, multi-coil sample points and sampling patterns.
//
// A pattern is an ordered list of (k-location, coil) multi-indices. Its order
// is the row/column order of every matrix built from it, so generators always
// emit k-major, coil-minor order.

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kcrime/errors.hpp"
#include "kcrime/rng.hpp"

namespace kcrime {

using Index = std::ptrdiff_t;

struct GridSpec {
  std::vector<int> dims;
  int coils = 1;

  GridSpec() = default;
  GridSpec(std::vector<int> d, int c) : dims(std::move(d)), coils(c) { validate(); }

  void validate() const {
    if (dims.empty()) throw UsageError("grid needs at least one dimension");
    for (int d : dims)
      if (d < 1) throw UsageError("grid extent must be >= 1, got " + std::to_string(d));
    if (coils < 1) throw UsageError("grid needs at least one coil, got " + std::to_string(coils));
  }

  std::size_t ndims() const { return dims.size(); }

  /// Number of k-space locations (product of extents).
  Index locations() const {
    return std::accumulate(dims.begin(), dims.end(), Index{1},
                           [](Index a, int b) { return a * b; });
  }

  /// Number of (k-location, coil) multi-indices on the full grid.
  Index size() const { return locations() * coils; }

  /// Row-major strides of the k-space array.
  std::vector<Index> strides() const {
    std::vector<Index> s(dims.size(), 1);
    for (std::size_t d = dims.size(); d-- > 1;) s[d - 1] = s[d] * dims[d];
    return s;
  }

  Index linear(const std::vector<int>& kidx) const {
    Index idx = 0;
    for (std::size_t d = 0; d < dims.size(); ++d) idx = idx * dims[d] + kidx[d];
    return idx;
  }

  std::vector<int> unravel(Index idx) const {
    std::vector<int> k(dims.size());
    for (std::size_t d = dims.size(); d-- > 0;) {
      k[d] = static_cast<int>(idx % dims[d]);
      idx /= dims[d];
    }
    return k;
  }

  /// "32x32x4": extents followed by the coil count.
  std::string to_string() const {
    std::string s;
    for (int d : dims) s += std::to_string(d) + "x";
    return s + std::to_string(coils);
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

namespace detail {

inline int parse_int(std::string_view s, const std::string& what) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty())
    throw UsageError("invalid integer for " + what + ": '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses "32x32x4" (last field is the coil count).
inline GridSpec parse_grid(std::string_view text) {
  const auto parts = detail::split(detail::trim(text), 'x');
  if (parts.size() < 2) throw UsageError("grid must look like 32x32x4, got '" + std::string(text) + "'");
  std::vector<int> dims;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) dims.push_back(detail::parse_int(parts[i], "grid extent"));
  return GridSpec(std::move(dims), detail::parse_int(parts.back(), "coil count"));
}

struct SamplePoint {
  std::vector<int> kidx;
  int coil = 0;

  friend auto operator<=>(const SamplePoint&, const SamplePoint&) = default;
  friend bool operator==(const SamplePoint&, const SamplePoint&) = default;
};

class SamplingPattern {
 public:
  SamplingPattern() = default;

  /// Explicit per-coil construction. Rejects out-of-range and duplicate points.
  SamplingPattern(GridSpec grid, std::vector<SamplePoint> points, std::string label = {})
      : grid_(std::move(grid)), points_(std::move(points)), label_(std::move(label)) {
    grid_.validate();
    loc_.reserve(points_.size());
    std::unordered_set<Index> seen;
    seen.reserve(points_.size() * 2);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (p.kidx.size() != grid_.ndims())
        throw UsageError("point " + std::to_string(i) + " has " + std::to_string(p.kidx.size()) +
                         " k-components, grid has " + std::to_string(grid_.ndims()));
      for (std::size_t d = 0; d < grid_.ndims(); ++d)
        if (p.kidx[d] < 0 || p.kidx[d] >= grid_.dims[d])
          throw UsageError("point " + std::to_string(i) + " k-index " + std::to_string(p.kidx[d]) +
                           " outside [0," + std::to_string(grid_.dims[d]) + ")");
      if (p.coil < 0 || p.coil >= grid_.coils)
        throw UsageError("point " + std::to_string(i) + " coil " + std::to_string(p.coil) + " outside [0," +
                         std::to_string(grid_.coils) + ")");
      const Index loc = grid_.linear(p.kidx);
      if (!seen.insert(loc * grid_.coils + p.coil).second)
        throw UsageError("duplicate sample point at index " + std::to_string(i));
      loc_.push_back(loc);
    }
  }

  const GridSpec& grid() const { return grid_; }
  const std::vector<SamplePoint>& points() const { return points_; }
  const std::string& label() const { return label_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const SamplePoint& operator[](std::size_t i) const { return points_[i]; }

  /// Linear k-location of point i.
  Index location(std::size_t i) const { return loc_[i]; }
  /// Position of point i in full_grid order.
  Index full_index(std::size_t i) const { return loc_[i] * grid_.coils + points_[i].coil; }

  /// Distinct k-locations, ascending.
  std::vector<Index> distinct_locations() const {
    std::vector<Index> locs(loc_);
    std::sort(locs.begin(), locs.end());
    locs.erase(std::unique(locs.begin(), locs.end()), locs.end());
    return locs;
  }

  bool same_points(const SamplingPattern& o) const { return grid_ == o.grid_ && points_ == o.points_; }

  SamplingPattern relabeled(std::string label) const {
    SamplingPattern p(*this);
    p.label_ = std::move(label);
    return p;
  }

  friend bool operator==(const SamplingPattern& a, const SamplingPattern& b) {
    return a.same_points(b) && a.label_ == b.label_;
  }

 private:
  GridSpec grid_;
  std::vector<SamplePoint> points_;
  std::string label_;
  std::vector<Index> loc_;
};

/// Expands k-locations over all coils in k-major, coil-minor order.
inline SamplingPattern from_locations(const GridSpec& grid, std::vector<Index> locs, std::string label) {
  std::sort(locs.begin(), locs.end());
  std::vector<SamplePoint> pts;
  pts.reserve(locs.size() * grid.coils);
  for (Index loc : locs) {
    auto k = grid.unravel(loc);
    for (int c = 0; c < grid.coils; ++c) pts.push_back({k, c});
  }
  return SamplingPattern(grid, std::move(pts), std::move(label));
}

inline SamplingPattern full_grid(const GridSpec& grid) {
  grid.validate();
  std::vector<Index> locs(static_cast<std::size_t>(grid.locations()));
  std::iota(locs.begin(), locs.end(), Index{0});
  return from_locations(grid, std::move(locs), "full");
}

/// Keeps every location whose `axis` component is congruent to offset mod accel.
inline SamplingPattern uniform_pattern(const GridSpec& grid, int accel, std::size_t axis = 0, int offset = 0) {
  grid.validate();
  if (accel < 1) throw UsageError("uniform pattern needs R >= 1");
  if (axis >= grid.ndims()) throw UsageError("uniform pattern axis " + std::to_string(axis) + " out of range");
  if (offset < 0 || offset >= accel)
    throw UsageError("uniform pattern offset must lie in [0,R), got " + std::to_string(offset));
  std::vector<Index> locs;
  for (Index l = 0; l < grid.locations(); ++l)
    if (grid.unravel(l)[axis] % accel == offset) locs.push_back(l);
  std::string label = "uniform:R=" + std::to_string(accel) + ",axis=" + std::to_string(axis);
  if (offset != 0) label += ",offset=" + std::to_string(offset);
  return from_locations(grid, std::move(locs), std::move(label));
}

/// Sheared 2D lattice over axes 0 and 1: (a,b) is kept iff a % r1 == 0 and
/// b % r2 == (shift * (a / r1)) % r2. Remaining axes are fully sampled.
inline SamplingPattern caipirinha_pattern(const GridSpec& grid, int r1, int r2, int shift) {
  grid.validate();
  if (r1 < 1 || r2 < 1) throw UsageError("CAIPIRINHA factors must be positive");
  if (shift < 0 || shift >= r2) throw UsageError("CAIPIRINHA shift must lie in [0,r2)");
  if (grid.ndims() < 2) throw UsageError("CAIPIRINHA needs at least two k-space dimensions");
  std::vector<Index> locs;
  for (Index l = 0; l < grid.locations(); ++l) {
    const auto k = grid.unravel(l);
    const int a = k[0], b = k[1];
    if (a % r1 == 0 && b % r2 == (shift * (a / r1)) % r2) locs.push_back(l);
  }
  return from_locations(grid, std::move(locs),
                        "caipi:" + std::to_string(r1) + "x" + std::to_string(r2) + ",shift=" + std::to_string(shift));
}

/// floor(locations / accel) k-locations drawn uniformly without replacement.
inline SamplingPattern random_pattern(const GridSpec& grid, int accel, std::uint64_t seed) {
  grid.validate();
  if (accel < 1) throw UsageError("random pattern needs R >= 1");
  const Index total = grid.locations();
  if (accel > total) throw UsageError("random pattern R=" + std::to_string(accel) + " exceeds location count");
  const Index keep = total / accel;
  std::vector<Index> all(static_cast<std::size_t>(total));
  std::iota(all.begin(), all.end(), Index{0});
  Rng rng(seed);
  // Partial Fisher-Yates.
  for (Index i = 0; i < keep; ++i) {
    const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(all[i], all[j]);
  }
  all.resize(static_cast<std::size_t>(keep));
  return from_locations(grid, std::move(all),
                        "random:R=" + std::to_string(accel) + ",seed=" + std::to_string(seed));
}

/// Builds a pattern from a spec string: `full`, `uniform:R=2[,axis=0][,offset=0]`,
/// `caipi:2x2[,shift=1]` or `random:R=4[,seed=7]`.
inline SamplingPattern parse_pattern_spec(std::string_view spec, const GridSpec& grid) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  std::vector<std::pair<std::string_view, std::string_view>> kv;
  std::string_view positional;
  if (colon != std::string_view::npos) {
    for (auto item : detail::split(spec.substr(colon + 1), ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        if (!positional.empty()) throw UsageError("pattern spec '" + std::string(spec) + "' has stray field");
        positional = item;
      } else {
        kv.emplace_back(detail::trim(item.substr(0, eq)), detail::trim(item.substr(eq + 1)));
      }
    }
  }
  auto get = [&](std::string_view key, int fallback, bool required = false) {
    for (auto& [k, v] : kv)
      if (k == key) return detail::parse_int(v, std::string(key));
    if (required) throw UsageError("pattern spec '" + std::string(spec) + "' is missing " + std::string(key));
    return fallback;
  };
  auto check_keys = [&](std::initializer_list<std::string_view> allowed) {
    for (auto& [k, v] : kv)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        throw UsageError("pattern spec '" + std::string(spec) + "' has unknown key '" + std::string(k) + "'");
  };

  if (kind == "full") {
    check_keys({});
    return full_grid(grid);
  }
  if (kind == "uniform") {
    check_keys({"R", "axis", "offset"});
    return uniform_pattern(grid, get("R", 0, true), static_cast<std::size_t>(get("axis", 0)), get("offset", 0));
  }
  if (kind == "caipi") {
    check_keys({"shift"});
    if (positional.empty()) throw UsageError("caipi spec needs factors, e.g. caipi:2x2,shift=1");
    const auto f = detail::split(positional, 'x');
    if (f.size() != 2) throw UsageError("caipi factors must look like 2x2");
    return caipirinha_pattern(grid, detail::parse_int(f[0], "r1"), detail::parse_int(f[1], "r2"), get("shift", 1));
  }
  if (kind == "random") {
    check_keys({"R", "seed"});
    return random_pattern(grid, get("R", 0, true), static_cast<std::uint64_t>(get("seed", 0)));
  }
  throw UsageError("unknown pattern kind '" + std::string(kind) + "'");
}

// Pattern file:
//   grid: d0 d1 coils
//   label: free text        (optional)
//   k0 k1 coil              (one line per point, in order)
// '#' starts a comment.

inline void write_pattern(std::ostream& os, const SamplingPattern& p) {
  os << "grid:";
  for (int d : p.grid().dims) os << ' ' << d;
  os << ' ' << p.grid().coils << '\n';
  if (!p.label().empty()) os << "label: " << p.label() << '\n';
  for (const auto& pt : p.points()) {
    for (int k : pt.kidx) os << k << ' ';
    os << pt.coil << '\n';
  }
}

inline SamplingPattern read_pattern(std::istream& is, const std::string& source = "<pattern>") {
  std::string line;
  std::size_t lineno = 0;
  std::optional<GridSpec> grid;
  std::string label;
  std::vector<SamplePoint> pts;
  auto ints = [&](std::string_view text) {
    std::vector<int> v;
    std::istringstream ss{std::string(text)};
    std::string tok;
    while (ss >> tok) {
      try {
        v.push_back(detail::parse_int(tok, "field"));
      } catch (const UsageError& e) {
        throw ParseError(source, lineno, e.what());
      }
    }
    return v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    if (!grid) {
      if (!view.starts_with("grid:")) throw ParseError(source, lineno, "expected 'grid:' header");
      auto v = ints(view.substr(5));
      if (v.size() < 2) throw ParseError(source, lineno, "grid header needs extents and a coil count");
      const int coils = v.back();
      v.pop_back();
      try {
        grid = GridSpec(std::move(v), coils);
      } catch (const UsageError& e) {
        throw ParseError(source, lineno, e.what());
      }
      continue;
    }
    if (view.starts_with("label:")) {
      label = std::string(detail::trim(view.substr(6)));
      continue;
    }
    auto v = ints(view);
    if (v.size() != grid->ndims() + 1)
      throw ParseError(source, lineno,
                       "expected " + std::to_string(grid->ndims() + 1) + " fields, got " + std::to_string(v.size()));
    const int coil = v.back();
    v.pop_back();
    for (std::size_t d = 0; d < v.size(); ++d)
      if (v[d] < 0 || v[d] >= grid->dims[d])
        throw ParseError(source, lineno, "k-index " + std::to_string(v[d]) + " out of range for axis " + std::to_string(d));
    if (coil < 0 || coil >= grid->coils) throw ParseError(source, lineno, "coil " + std::to_string(coil) + " out of range");
    pts.push_back({std::move(v), coil});
  }
  if (!grid) throw ParseError(source, lineno, "missing 'grid:' header");
  try {
    return SamplingPattern(*grid, std::move(pts), std::move(label));
  } catch (const ParseError&) {
    throw;
  } catch (const UsageError& e) {
    throw ParseError(source, lineno, e.what());
  }
}

inline void save_pattern(const std::string& path, const SamplingPattern& p) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write pattern file " + path);
  write_pattern(os, p);
}

inline SamplingPattern load_pattern(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read pattern file " + path);
  return read_pattern(is, path);
}

}  // namespace kcrime
