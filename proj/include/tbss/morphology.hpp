#pragma once

// Per-slice refinement of reconstructed boundaries: thinning to a medial curve
// followed by extraction of the contour that faces the enclosed lumen.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "tbss/error.hpp"
#include "tbss/io.hpp"
#include "tbss/parallel.hpp"
#include "tbss/volume.hpp"

namespace tbss {

struct PixelCoord {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

/// Mutable H x W binary working image. Reads outside the image return 0.
class SliceMask {
 public:
  SliceMask() = default;
  SliceMask(int rows, int cols) : rows_(rows), cols_(cols), px_(static_cast<std::size_t>(rows) * cols, 0) {
    if (rows < 0 || cols < 0) throw Error(ErrorKind::InvalidArgument, "negative slice size");
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

  std::uint8_t operator()(int r, int c) const noexcept {
    return contains(r, c) ? px_[static_cast<std::size_t>(r) * cols_ + c] : 0;
  }
  void set(int r, int c, bool on) { px_.at(static_cast<std::size_t>(r) * cols_ + c) = on ? 1 : 0; }

  std::span<const std::uint8_t> pixels() const noexcept { return px_; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(px_.begin(), px_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const SliceMask&, const SliceMask&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> px_;
};

/// Slice `n` of a label volume as a mask of one boundary class.
inline SliceMask channel_slice(const LabelVolume& labels, std::size_t n, Label which) {
  const Dims& d = labels.dims();
  SliceMask m(static_cast<int>(d.rows), static_cast<int>(d.cols));
  const auto src = labels.slice(n);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      m.set(r, c, src[static_cast<std::size_t>(r) * d.cols + c] == static_cast<std::uint8_t>(which));
    }
  }
  return m;
}

inline SliceMask mask_slice(const BinaryMask& mask, std::size_t n) {
  const Dims& d = mask.dims();
  SliceMask m(static_cast<int>(d.rows), static_cast<int>(d.cols));
  const auto src = mask.slice(n);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m.set(r, c, src[static_cast<std::size_t>(r) * d.cols + c] != 0);
  }
  return m;
}

struct Contour {
  std::vector<PixelCoord> points;
  bool closed = false;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  friend bool operator==(const Contour&, const Contour&) = default;
};

// ---- thinning ----------------------------------------------------------------

namespace detail {

// Neighbour code bit k holds P(k+2) of the 3x3 window
//   P9 P2 P3
//   P8 P1 P4
//   P7 P6 P5
inline constexpr std::array<std::array<int, 2>, 8> kThinningOffsets{{
    {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

constexpr bool thinning_removes(unsigned code, int pass) {
  auto p = [code](int k) { return (code >> (k - 2)) & 1u; };  // k in 2..9
  int neighbours = 0;
  int transitions = 0;
  for (int k = 0; k < 8; ++k) {
    neighbours += (code >> k) & 1u;
    if (!((code >> k) & 1u) && ((code >> ((k + 1) % 8)) & 1u)) ++transitions;
  }
  if (neighbours < 2 || neighbours > 6 || transitions != 1) return false;
  if (pass == 0) return (p(2) * p(4) * p(6)) == 0 && (p(4) * p(6) * p(8)) == 0;
  return (p(2) * p(4) * p(8)) == 0 && (p(2) * p(6) * p(8)) == 0;
}

constexpr std::array<std::array<bool, 256>, 2> make_thinning_table() {
  std::array<std::array<bool, 256>, 2> t{};
  for (int pass = 0; pass < 2; ++pass) {
    for (unsigned code = 0; code < 256; ++code) t[pass][code] = thinning_removes(code, pass);
  }
  return t;
}

inline constexpr auto kThinningTable = make_thinning_table();

inline unsigned neighbour_code(const SliceMask& m, int r, int c) {
  unsigned code = 0;
  for (int k = 0; k < 8; ++k) {
    if (m(r + kThinningOffsets[k][0], c + kThinningOffsets[k][1])) code |= 1u << k;
  }
  return code;
}

}  // namespace detail

/// Zhang-Suen two-subiteration thinning (8-connected foreground), iterated to
/// a fixpoint. Pixels outside the image count as background. When all four
/// pixels of a 2x2 block are scheduled for removal in the same subiteration,
/// the block's top-left pixel is kept; plain Zhang-Suen would erase the block
/// and with it a connected component.
inline SliceMask skeletonize(const SliceMask& input) {
  SliceMask img = input;
  std::vector<PixelCoord> doomed;
  std::vector<std::uint8_t> flag(static_cast<std::size_t>(img.rows()) * img.cols(), 0);
  auto flagged = [&](int r, int c) {
    return img.contains(r, c) && flag[static_cast<std::size_t>(r) * img.cols() + c];
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int r = 0; r < img.rows(); ++r) {
        for (int c = 0; c < img.cols(); ++c) {
          if (img(r, c) && detail::kThinningTable[pass][detail::neighbour_code(img, r, c)]) {
            doomed.push_back({r, c});
            flag[static_cast<std::size_t>(r) * img.cols() + c] = 1;
          }
        }
      }
      std::vector<PixelCoord> spared;
      for (const auto& p : doomed) {
        if (flagged(p.row, p.col + 1) && flagged(p.row + 1, p.col) && flagged(p.row + 1, p.col + 1)) {
          spared.push_back(p);
        }
      }
      for (const auto& p : spared) flag[static_cast<std::size_t>(p.row) * img.cols() + p.col] = 0;
      for (const auto& p : doomed) {
        auto& f = flag[static_cast<std::size_t>(p.row) * img.cols() + p.col];
        if (f) {
          img.set(p.row, p.col, false);
          changed = true;
        }
        f = 0;
      }
    }
  }
  return img;
}

// ---- border following --------------------------------------------------------

struct BorderSet {
  std::vector<Contour> outer;
  std::vector<Contour> holes;
};

namespace detail {

// Clockwise on screen (row grows downwards), starting east.
inline constexpr std::array<std::array<int, 2>, 8> kRing{{
    {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};

inline int ring_index(int dr, int dc) {
  for (int k = 0; k < 8; ++k) {
    if (kRing[k][0] == dr && kRing[k][1] == dc) return k;
  }
  return -1;
}

/// Rotates a closed point cycle to start at its smallest (row, col) and orients
/// it clockwise on screen. Cycles with zero signed area keep their orientation.
inline void normalize_cycle(std::vector<PixelCoord>& pts) {
  if (pts.size() < 2) return;
  const auto first = std::min_element(pts.begin(), pts.end());
  std::rotate(pts.begin(), first, pts.end());
  long long twice_area = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto& a = pts[k];
    const auto& b = pts[(k + 1) % pts.size()];
    twice_area += static_cast<long long>(a.col) * b.row - static_cast<long long>(b.col) * a.row;
  }
  if (twice_area < 0) std::reverse(pts.begin() + 1, pts.end());
}

}  // namespace detail

/// Suzuki-Abe border following with 8-connected foreground and 4-connected
/// background. Outer borders surround foreground components; hole borders are
/// the foreground pixels 4-adjacent to an enclosed background component. Every
/// contour starts at its smallest (row, col) pixel and runs clockwise.
inline BorderSet trace_borders(const SliceMask& mask) {
  const int rows = mask.rows() + 2;
  const int cols = mask.cols() + 2;
  std::vector<int> f(static_cast<std::size_t>(rows) * cols, 0);
  auto at = [&](int r, int c) -> int& { return f[static_cast<std::size_t>(r) * cols + c]; };
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) at(r + 1, c + 1) = mask(r, c);
  }

  BorderSet out;
  int nbd = 1;
  for (int i = 1; i < rows - 1; ++i) {
    for (int j = 1; j < cols - 1; ++j) {
      const int fij = at(i, j);
      if (fij == 0) continue;
      bool outer = false;
      int i2 = 0, j2 = 0;
      if (fij == 1 && at(i, j - 1) == 0) {
        outer = true;
        i2 = i;
        j2 = j - 1;
      } else if (fij >= 1 && at(i, j + 1) == 0) {
        i2 = i;
        j2 = j + 1;
      } else {
        continue;
      }
      ++nbd;

      Contour border;
      border.closed = true;
      // Clockwise from (i2, j2) for any nonzero neighbour.
      const int start_dir = detail::ring_index(i2 - i, j2 - j);
      int found = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (start_dir + k) % 8;
        if (at(i + detail::kRing[d][0], j + detail::kRing[d][1]) != 0) {
          found = d;
          break;
        }
      }
      if (found < 0) {
        at(i, j) = -nbd;
        border.points.push_back({i - 1, j - 1});
      } else {
        const int i1 = i + detail::kRing[found][0];
        const int j1 = j + detail::kRing[found][1];
        int pi = i1, pj = j1;  // (i2, j2)
        int ci = i, cj = j;    // (i3, j3)
        while (true) {
          border.points.push_back({ci - 1, cj - 1});
          // Counterclockwise from the element after (i2, j2).
          const int from = detail::ring_index(pi - ci, pj - cj);
          bool east_zero_examined = false;
          int ni = 0, nj = 0;
          for (int k = 1; k <= 8; ++k) {
            const int d = ((from - k) % 8 + 8) % 8;
            const int ri = ci + detail::kRing[d][0];
            const int rj = cj + detail::kRing[d][1];
            if (at(ri, rj) != 0) {
              ni = ri;
              nj = rj;
              break;
            }
            if (d == 0) east_zero_examined = true;
          }
          if (east_zero_examined) {
            at(ci, cj) = -nbd;
          } else if (at(ci, cj) == 1) {
            at(ci, cj) = nbd;
          }
          if (ni == i && nj == j && ci == i1 && cj == j1) break;
          pi = ci;
          pj = cj;
          ci = ni;
          cj = nj;
        }
      }
      detail::normalize_cycle(border.points);
      (outer ? out.outer : out.holes).push_back(std::move(border));
    }
  }
  return out;
}

namespace detail {

inline const Contour* longest(const std::vector<Contour>& v) {
  const Contour* best = nullptr;
  for (const auto& c : v) {
    if (!best || c.size() > best->size()) best = &c;
  }
  return best;
}

}  // namespace detail

/// The longest hole border, or the longest outer border when the mask encloses
/// no background. Empty mask gives an empty contour.
inline Contour inside_contour(const BorderSet& borders) {
  if (const auto* c = detail::longest(borders.holes)) return *c;
  if (const auto* c = detail::longest(borders.outer)) return *c;
  return {};
}

inline Contour inside_contour(const SliceMask& mask) { return inside_contour(trace_borders(mask)); }

inline SliceMask rasterize(const Contour& contour, int rows, int cols) {
  SliceMask m(rows, cols);
  for (const auto& p : contour.points) {
    if (m.contains(p.row, p.col)) m.set(p.row, p.col, true);
  }
  return m;
}

// ---- per-volume refinement -------------------------------------------------------

struct SliceContours {
  Contour inner;
  Contour outer;
  // Every border traced on the refined channel, holes first.
  std::vector<Contour> inner_all;
  std::vector<Contour> outer_all;

  const Contour& channel(Label which) const { return which == Label::Inner ? inner : outer; }
};

struct RefineOptions {
  bool skeletonize = true;
  bool keep_all = false;
  std::size_t threads = 1;
};

/// Skeletonizes each boundary channel of each slice and takes its inside
/// contour. With skeletonize off the contour is taken from the raw channel.
inline std::vector<SliceContours> refine_labels(const LabelVolume& labels, const RefineOptions& opts = {}) {
  std::vector<SliceContours> out(labels.dims().slices);
  parallel_for(out.size(), opts.threads, [&](std::size_t n) {
    for (Label which : {Label::Inner, Label::Outer}) {
      SliceMask m = channel_slice(labels, n, which);
      if (opts.skeletonize) m = skeletonize(m);
      auto borders = trace_borders(m);
      Contour chosen = inside_contour(borders);
      auto& slot = out[n];
      (which == Label::Inner ? slot.inner : slot.outer) = std::move(chosen);
      if (opts.keep_all) {
        auto& all = which == Label::Inner ? slot.inner_all : slot.outer_all;
        all = std::move(borders.holes);
        all.insert(all.end(), std::make_move_iterator(borders.outer.begin()),
                   std::make_move_iterator(borders.outer.end()));
      }
    }
  });
  return out;
}

// ---- contour JSON ----------------------------------------------------------------
//
// {"slices": [{"inner": [[r, c], ...], "outer": [[r, c], ...]}, ...]}
// With all contours kept, each slice also carries "inner_all" and "outer_all"
// as lists of point lists.

namespace detail {

inline nlohmann::json points_json(const Contour& c) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : c.points) arr.push_back({p.row, p.col});
  return arr;
}

inline Contour contour_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Format, "contour must be an array of [row, col] pairs");
  Contour c;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw Error(ErrorKind::Format, "contour point must be an integer [row, col] pair");
    }
    c.points.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  c.closed = !c.points.empty();
  return c;
}

}  // namespace detail

inline nlohmann::json contours_to_json(const std::vector<SliceContours>& slices, bool include_all = false) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : slices) {
    nlohmann::json o{{"inner", detail::points_json(s.inner)}, {"outer", detail::points_json(s.outer)}};
    if (include_all) {
      for (auto [key, list] : {std::pair{"inner_all", &s.inner_all}, std::pair{"outer_all", &s.outer_all}}) {
        nlohmann::json all = nlohmann::json::array();
        for (const auto& c : *list) all.push_back(detail::points_json(c));
        o[key] = std::move(all);
      }
    }
    arr.push_back(std::move(o));
  }
  return nlohmann::json{{"slices", std::move(arr)}};
}

inline std::vector<SliceContours> contours_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("slices") || !j.at("slices").is_array()) {
    throw Error(ErrorKind::Format, "contour file needs a \"slices\" array");
  }
  std::vector<SliceContours> out;
  for (const auto& s : j.at("slices")) {
    if (!s.is_object() || !s.contains("inner") || !s.contains("outer")) {
      throw Error(ErrorKind::Format, "each slice needs \"inner\" and \"outer\" contours");
    }
    SliceContours sc;
    sc.inner = detail::contour_from_json(s.at("inner"));
    sc.outer = detail::contour_from_json(s.at("outer"));
    for (auto [key, list] : {std::pair{"inner_all", &sc.inner_all}, std::pair{"outer_all", &sc.outer_all}}) {
      if (!s.contains(key)) continue;
      for (const auto& c : s.at(key)) list->push_back(detail::contour_from_json(c));
    }
    out.push_back(std::move(sc));
  }
  return out;
}

inline void save_contours(const std::vector<SliceContours>& slices, const std::filesystem::path& path,
                          bool include_all = false) {
  write_json(contours_to_json(slices, include_all), path);
}

inline std::vector<SliceContours> load_contours(const std::filesystem::path& path) {
  return contours_from_json(read_json(path));
}

}  // namespace tbss
