#pragma once

// Tube beam stack search.
//
// An artery of N probability slices is cut into sections of at most M slices.
// Inside a section, a path picks one voxel per slice. It starts on any voxel
// of the first slice, and each following voxel is one of the S most probable
// voxels inside the beam_side x beam_side window centred on the previous
// voxel. The path's score is the running sum of ln(max(p, log_floor)) and
// every prefix must stay strictly above the threshold T. Voxels on paths that
// reach the last slice of the section form the reconstruction.
//
// The depth-first enumeration with backtracking visits exponentially many
// paths, but the union it draws can be computed exactly with two sweeps:
//
//  * Children are ranked by probability, and the log score is monotone in
//    probability, so the children that pass the threshold form a prefix of the
//    ranking. "The S best children that pass" is therefore "the children that
//    pass among the S best", which makes the child lists independent of the
//    path that reached a voxel.
//  * Scores never increase along a path and rounded addition is monotone, so a
//    voxel lies on an accepted path iff its best prefix score, extended by some
//    suffix, stays above T. The forward sweep keeps the best prefix score; the
//    backward sweep keeps, per voxel, the smallest double a prefix may have for
//    some suffix to finish above T. Both are computed with the same left-to-right
//    additions the enumeration performs, so the result is bit-for-bit the same.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tbss/error.hpp"
#include "tbss/parallel.hpp"
#include "tbss/volume.hpp"

namespace tbss {

enum class Direction : std::uint8_t { Forward, Reverse };

/// Hyperparameters. Defaults are the reference values M=8, T=-0.5 (inner) and
/// -3 (outer), S=9, B=5x5.
struct SearchParams {
  std::size_t section_len = 8;
  double threshold_inner = -0.5;
  double threshold_outer = -3.0;
  std::size_t stack = 9;
  std::size_t beam_side = 5;
  double log_floor = 1e-9;
  // Scale T by M'/M for a trailing section of M' < M slices.
  bool scale_threshold = false;

  double threshold(Channel c) const { return c == Channel::Inner ? threshold_inner : threshold_outer; }

  void validate() const {
    if (section_len < 1) throw Error(ErrorKind::InvalidArgument, "section length M must be >= 1");
    if (stack < 1) throw Error(ErrorKind::InvalidArgument, "stack S must be >= 1");
    if (beam_side < 1 || beam_side % 2 == 0) {
      throw Error(ErrorKind::InvalidArgument,
                  "beam side must be odd and >= 1, got " + std::to_string(beam_side));
    }
    if (!(log_floor > 0.0 && log_floor < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "log floor must lie in (0, 1)");
    }
    if (!std::isfinite(threshold_inner) || !std::isfinite(threshold_outer)) {
      throw Error(ErrorKind::InvalidArgument, "thresholds must be finite");
    }
  }
};

/// Half-open slice range [start, end).
struct SectionRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const SectionRange&, const SectionRange&) = default;
};

/// ceil(n / m) contiguous sections; all have m slices except possibly the last.
inline std::vector<SectionRange> partition_sections(std::size_t n_slices, std::size_t m) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "section length must be >= 1");
  std::vector<SectionRange> out;
  out.reserve((n_slices + m - 1) / m);
  for (std::size_t s = 0; s < n_slices; s += m) out.push_back({s, std::min(s + m, n_slices)});
  return out;
}

inline double voxel_logprob(double p, double log_floor) { return std::log(std::max(p, log_floor)); }

/// Sum of ln(max(p, log_floor)), accumulated left to right.
template <std::floating_point T>
double path_logprob(std::span<const T> probs, double log_floor = 1e-9) {
  double sum = 0.0;
  for (T p : probs) sum += voxel_logprob(static_cast<double>(p), log_floor);
  return sum;
}

inline double path_logprob(std::initializer_list<double> probs, double log_floor = 1e-9) {
  return path_logprob(std::span<const double>(probs.begin(), probs.size()), log_floor);
}

/// Threshold applied to a section of `len` slices.
inline double section_threshold(const SearchParams& params, double base, std::size_t len) {
  if (!params.scale_threshold || len >= params.section_len) return base;
  return base * static_cast<double>(len) / static_cast<double>(params.section_len);
}

namespace detail {

/// Smallest double s with fl(s + step) >= target.
inline double min_start(double step, double target) {
  if (target == std::numeric_limits<double>::infinity()) return target;
  double s = target - step;
  if (s + step >= target) {
    for (double lower = std::nextafter(s, -INFINITY); lower + step >= target;
         lower = std::nextafter(s, -INFINITY)) {
      s = lower;
    }
  } else {
    while (s + step < target) s = std::nextafter(s, INFINITY);
  }
  return s;
}

class SectionSearch {
 public:
  SectionSearch(const ProbabilityVolume& section, const SearchParams& params, double threshold)
      : probs_(section.data()),
        dims_(section.dims()),
        params_(params),
        threshold_(threshold),
        half_(static_cast<std::ptrdiff_t>(params.beam_side / 2)) {
    logp_.resize(probs_.size());
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      logp_[i] = voxel_logprob(static_cast<double>(probs_[i]), params.log_floor);
    }
  }

  BinaryMask run() {
    const std::size_t plane = dims_.slice_size();
    const std::size_t depth = dims_.slices;
    std::vector<std::uint8_t> out(dims_.size(), 0);
    if (depth == 0 || plane == 0) return BinaryMask(dims_, std::move(out));

    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    constexpr double kPosInf = std::numeric_limits<double>::infinity();

    // Forward sweep: best prefix score per voxel (seeds are first-slice voxels).
    std::vector<double> best(dims_.size(), kNegInf);
    for (std::size_t v = 0; v < plane; ++v) {
      if (logp_[v] > threshold_) best[v] = logp_[v];
    }
    for (std::size_t m = 0; m + 1 < depth; ++m) {
      for (std::size_t v = m * plane; v < (m + 1) * plane; ++v) {
        if (!(best[v] > threshold_)) continue;
        for (std::size_t w : children(v)) {
          const double s = best[v] + logp_[w];
          if (s > threshold_ && s > best[w]) best[w] = s;
        }
      }
    }

    // Backward sweep: smallest prefix score that still completes above T.
    std::vector<double> need(dims_.size(), kPosInf);
    const double last_need = std::nextafter(threshold_, kPosInf);
    for (std::size_t v = (depth - 1) * plane; v < depth * plane; ++v) {
      if (best[v] > threshold_) need[v] = last_need;
    }
    for (std::size_t m = depth - 1; m-- > 0;) {
      for (std::size_t v = m * plane; v < (m + 1) * plane; ++v) {
        if (!(best[v] > threshold_)) continue;
        double n = kPosInf;
        for (std::size_t w : children(v)) {
          if (need[w] != kPosInf) n = std::min(n, min_start(logp_[w], need[w]));
        }
        need[v] = n;
      }
    }

    for (std::size_t v = 0; v < out.size(); ++v) {
      out[v] = best[v] > threshold_ && best[v] >= need[v];
    }
    return BinaryMask(dims_, std::move(out));
  }

 private:
  // Up to S voxels of the next slice inside the window around v, by descending
  // probability, ties by ascending (row, col).
  const std::vector<std::size_t>& children(std::size_t v) {
    const std::size_t plane = dims_.slice_size();
    const auto row = static_cast<std::ptrdiff_t>((v % plane) / dims_.cols);
    const auto col = static_cast<std::ptrdiff_t>(v % dims_.cols);
    const std::size_t next_base = (v / plane + 1) * plane;
    const auto rows = static_cast<std::ptrdiff_t>(dims_.rows);
    const auto cols = static_cast<std::ptrdiff_t>(dims_.cols);

    window_.clear();
    for (auto r = std::max<std::ptrdiff_t>(0, row - half_); r <= std::min(rows - 1, row + half_); ++r) {
      for (auto c = std::max<std::ptrdiff_t>(0, col - half_); c <= std::min(cols - 1, col + half_); ++c) {
        window_.push_back(next_base + static_cast<std::size_t>(r * cols + c));
      }
    }
    // Window indices are generated in (row, col) order, so index order is the
    // tie-break.
    auto by_rank = [this](std::size_t a, std::size_t b) {
      return probs_[a] > probs_[b] || (probs_[a] == probs_[b] && a < b);
    };
    const std::size_t keep = std::min(params_.stack, window_.size());
    std::partial_sort(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(keep),
                      window_.end(), by_rank);
    window_.resize(keep);
    return window_;
  }

  std::span<const float> probs_;
  Dims dims_;
  SearchParams params_;
  double threshold_;
  std::ptrdiff_t half_;
  std::vector<double> logp_;
  std::vector<std::size_t> window_;
};

}  // namespace detail

/// Union of the voxels of every accepted path through `section`, whose first
/// slice seeds the search and whose last slice every path must reach.
inline BinaryMask search_section(const ProbabilityVolume& section, const SearchParams& params,
                                 double threshold) {
  params.validate();
  return detail::SectionSearch(section, params, threshold).run();
}

namespace detail {

struct SectionTask {
  SectionRange range;
  Direction direction;
  double threshold;
};

inline BinaryMask search_into(const ProbabilityVolume& vol, const SearchParams& params,
                              const SectionTask& task) {
  const bool reversed = task.direction == Direction::Reverse;
  const auto section = vol.slices(task.range.start, task.range.end, reversed);
  const auto mask = search_section(section, params, task.threshold);
  return mask.slices(0, mask.dims().slices, reversed);
}

inline void paste_slices(std::vector<std::uint8_t>& dst, const BinaryMask& src, std::size_t first_slice) {
  const std::size_t plane = src.dims().slice_size();
  std::copy(src.data().begin(), src.data().end(),
            dst.begin() + static_cast<std::ptrdiff_t>(first_slice * plane));
}

}  // namespace detail

/// Searches every section of `vol` in one direction. Reverse search flips each
/// section's slice order, searches, and flips the result back.
inline BinaryMask search_direction(const ProbabilityVolume& vol, const SearchParams& params,
                                   double threshold, Direction direction, std::size_t threads = 1) {
  params.validate();
  const auto sections = partition_sections(vol.dims().slices, params.section_len);
  std::vector<BinaryMask> parts(sections.size());
  parallel_for(sections.size(), threads, [&](std::size_t i) {
    const double t = section_threshold(params, threshold, sections[i].size());
    parts[i] = detail::search_into(vol, params, {sections[i], direction, t});
  });
  std::vector<std::uint8_t> out(vol.dims().size(), 0);
  for (std::size_t i = 0; i < sections.size(); ++i) detail::paste_slices(out, parts[i], sections[i].start);
  return BinaryMask(vol.dims(), std::move(out));
}

/// Per voxel: inner if either inner mask is set, else outer if either outer
/// mask is set, else background.
inline LabelVolume merge_masks(const BinaryMask& r_in, const BinaryMask& r_out, const BinaryMask& r_rev_in,
                               const BinaryMask& r_rev_out) {
  require_same_dims(r_in.dims(), r_out.dims(), "merge_masks");
  require_same_dims(r_in.dims(), r_rev_in.dims(), "merge_masks");
  require_same_dims(r_in.dims(), r_rev_out.dims(), "merge_masks");
  return merge_labels(mask_union(r_in, r_rev_in), mask_union(r_out, r_rev_out));
}

struct DirectionalMasks {
  BinaryMask inner_forward;
  BinaryMask outer_forward;
  BinaryMask inner_reverse;
  BinaryMask outer_reverse;
};

/// All four single-boundary reconstructions. Every (channel, direction,
/// section) triple is an independent task.
inline DirectionalMasks search_all(const ProbabilityVolume& inner, const ProbabilityVolume& outer,
                                   const SearchParams& params, std::size_t threads = 1) {
  params.validate();
  require_same_dims(inner.dims(), outer.dims(), "reconstruct_artery");
  const auto sections = partition_sections(inner.dims().slices, params.section_len);
  constexpr std::array<Channel, 2> kChannels{Channel::Inner, Channel::Outer};
  constexpr std::array<Direction, 2> kDirections{Direction::Forward, Direction::Reverse};

  const std::size_t per_run = sections.size();
  std::vector<BinaryMask> parts(4 * per_run);
  parallel_for(parts.size(), threads, [&](std::size_t i) {
    const std::size_t run = i / per_run;
    const auto& range = sections[i % per_run];
    const Channel ch = kChannels[run / 2];
    const Direction dir = kDirections[run % 2];
    const double t = section_threshold(params, params.threshold(ch), range.size());
    parts[i] = detail::search_into(ch == Channel::Inner ? inner : outer, params, {range, dir, t});
  });

  auto assemble = [&](std::size_t run) {
    std::vector<std::uint8_t> out(inner.dims().size(), 0);
    for (std::size_t s = 0; s < per_run; ++s) {
      detail::paste_slices(out, parts[run * per_run + s], sections[s].start);
    }
    return BinaryMask(inner.dims(), std::move(out));
  };
  return DirectionalMasks{assemble(0), assemble(2), assemble(1), assemble(3)};
}

/// Full reconstruction A = concatenation of the merged per-section results.
inline LabelVolume reconstruct_artery(const ProbabilityVolume& inner, const ProbabilityVolume& outer,
                                      const SearchParams& params, std::size_t threads = 1) {
  const auto m = search_all(inner, outer, params, threads);
  return merge_masks(m.inner_forward, m.outer_forward, m.inner_reverse, m.outer_reverse);
}

}  // namespace tbss
