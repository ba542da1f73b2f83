#pragma once

// Hausdorff-distance evaluation of per-slice contours against annotated
// boundary voxels, stratified by boundary channel and slice health.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbss/error.hpp"
#include "tbss/io.hpp"
#include "tbss/morphology.hpp"
#include "tbss/volume.hpp"

namespace tbss {

namespace detail {

inline std::int64_t squared_distance(const PixelCoord& a, const PixelCoord& b) {
  const std::int64_t dr = a.row - b.row;
  const std::int64_t dc = a.col - b.col;
  return dr * dr + dc * dc;
}

/// max over a of min over b, in squared integer units. The inner scan stops as
/// soon as a point of b is closer than the running maximum, since such a point
/// of a cannot raise it.
inline std::int64_t directed_hausdorff_sq(std::span<const PixelCoord> a, std::span<const PixelCoord> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::Degenerate, "Hausdorff distance of an empty point set");
  std::int64_t cmax = 0;
  for (const auto& p : a) {
    std::int64_t cmin = std::numeric_limits<std::int64_t>::max();
    for (const auto& q : b) {
      const auto d = squared_distance(p, q);
      if (d < cmin) {
        cmin = d;
        if (cmin <= cmax) break;
      }
    }
    if (cmin > cmax) cmax = cmin;
  }
  return cmax;
}

}  // namespace detail

inline double directed_hausdorff(std::span<const PixelCoord> a, std::span<const PixelCoord> b) {
  return std::sqrt(static_cast<double>(detail::directed_hausdorff_sq(a, b)));
}

inline double hausdorff(std::span<const PixelCoord> a, std::span<const PixelCoord> b) {
  const auto ab = detail::directed_hausdorff_sq(a, b);
  const auto ba = detail::directed_hausdorff_sq(b, a);
  return std::sqrt(static_cast<double>(std::max(ab, ba)));
}

/// Coordinates of slice `n` carrying label `which`, in raster order.
inline std::vector<PixelCoord> label_points(const LabelVolume& labels, std::size_t n, Label which) {
  std::vector<PixelCoord> pts;
  const Dims& d = labels.dims();
  const auto src = labels.slice(n);
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t c = 0; c < d.cols; ++c) {
      if (src[r * d.cols + c] == static_cast<std::uint8_t>(which))
        pts.push_back({static_cast<int>(r), static_cast<int>(c)});
    }
  }
  return pts;
}

struct StratumStats {
  std::optional<double> mean;  // empty when no slice was included
  std::size_t count = 0;
  std::size_t excluded = 0;
  double sum = 0.0;
};

struct SliceDistances {
  bool healthy = true;
  std::optional<double> inner;
  std::optional<double> outer;
};

struct EvalReport {
  std::string units = "voxel";
  // cells[channel][stratum]; channel 0 inner, 1 outer; stratum 0 healthy, 1 unhealthy.
  std::array<std::array<StratumStats, 2>, 2> cells{};
  std::vector<SliceDistances> per_slice;

  const StratumStats& cell(Channel c, Health h) const {
    return cells[c == Channel::Inner ? 0 : 1][h == Health::Healthy ? 0 : 1];
  }

  /// Mean over every included slice of one channel, summed left to right.
  std::optional<double> channel_mean(Channel c) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : per_slice) {
      const auto& d = c == Channel::Inner ? s.inner : s.outer;
      if (d) {
        sum += *d;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

/// Per slice and channel, the Hausdorff distance between the contour points and
/// the annotated voxels of that channel. Slices where either set is empty are
/// excluded and counted. Spacing, when given, scales distances by the in-plane
/// voxel size.
inline EvalReport evaluate(std::span<const SliceContours> contours, const LabelVolume& gt, const SliceMeta& meta,
                           std::optional<VoxelSpacing> spacing = std::nullopt) {
  const std::size_t n = gt.dims().slices;
  if (contours.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "contours cover " + std::to_string(contours.size()) +
                                                  " slices, ground truth has " + std::to_string(n));
  }
  if (meta.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "slice meta has " + std::to_string(meta.size()) +
                                                  " entries, ground truth has " + std::to_string(n));
  }
  double scale = 1.0;
  EvalReport report;
  if (spacing) {
    spacing->validate();
    scale = spacing->in_plane_mm;
    report.units = "mm";
  }
  report.per_slice.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto& row = report.per_slice[s];
    row.healthy = meta.healthy[s];
    const std::size_t stratum = row.healthy ? 0 : 1;
    for (std::size_t ch = 0; ch < 2; ++ch) {
      const Label which = ch == 0 ? Label::Inner : Label::Outer;
      const auto& predicted = contours[s].channel(which).points;
      const auto truth = label_points(gt, s, which);
      auto& cell = report.cells[ch][stratum];
      if (predicted.empty() || truth.empty()) {
        ++cell.excluded;
        continue;
      }
      const double d = hausdorff(predicted, truth) * scale;
      (ch == 0 ? row.inner : row.outer) = d;
      cell.sum += d;
      ++cell.count;
    }
  }
  for (auto& channel : report.cells) {
    for (auto& cell : channel) {
      if (cell.count > 0) cell.mean = cell.sum / static_cast<double>(cell.count);
    }
  }
  return report;
}

// ---- report export -----------------------------------------------------------------

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json cells = nlohmann::json::object();
  for (std::size_t ch = 0; ch < 2; ++ch) {
    nlohmann::json strata = nlohmann::json::object();
    for (std::size_t st = 0; st < 2; ++st) {
      const auto& c = r.cells[ch][st];
      strata[st == 0 ? "healthy" : "unhealthy"] = {
          {"mean", detail::optional_number(c.mean)}, {"count", c.count}, {"excluded", c.excluded}};
    }
    cells[ch == 0 ? "inner" : "outer"] = std::move(strata);
  }
  nlohmann::json slices = nlohmann::json::array();
  for (std::size_t s = 0; s < r.per_slice.size(); ++s) {
    const auto& p = r.per_slice[s];
    slices.push_back({{"slice", s},
                      {"healthy", p.healthy},
                      {"inner", detail::optional_number(p.inner)},
                      {"outer", detail::optional_number(p.outer)}});
  }
  return {{"units", r.units}, {"cells", std::move(cells)}, {"per_slice", std::move(slices)}};
}

/// channel,stratum,mean,count,excluded with one row per table cell.
inline std::string report_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "channel,stratum,mean_" << r.units << ",count,excluded\n";
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t st = 0; st < 2; ++st) {
      const auto& c = r.cells[ch][st];
      os << (ch == 0 ? "inner" : "outer") << ',' << (st == 0 ? "healthy" : "unhealthy") << ',';
      if (c.mean) os << *c.mean;
      os << ',' << c.count << ',' << c.excluded << '\n';
    }
  }
  return os.str();
}

inline void save_report(const EvalReport& r, const std::filesystem::path& json_path,
                        const std::filesystem::path& csv_path) {
  write_json(report_to_json(r), json_path);
  const auto csv = report_to_csv(r);
  detail::write_file(csv_path, csv.data(), csv.size());
}

}  // namespace tbss
