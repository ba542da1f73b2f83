#pragma once

// Global Otsu thresholding baseline.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tbss/error.hpp"
#include "tbss/volume.hpp"

namespace tbss {

inline constexpr std::size_t kHistogramBins = 256;

struct Histogram {
  std::array<std::uint64_t, kHistogramBins> bins{};

  std::uint64_t total() const noexcept {
    std::uint64_t n = 0;
    for (auto b : bins) n += b;
    return n;
  }
};

/// Uniform bins on [0, 1]; 1.0 falls into the last bin.
inline std::size_t histogram_bin(float p) {
  const auto k = static_cast<std::size_t>(static_cast<double>(p) * kHistogramBins);
  return std::min(k, kHistogramBins - 1);
}

inline double bin_center(std::size_t k) { return (static_cast<double>(k) + 0.5) / kHistogramBins; }

inline Histogram histogram(const ProbabilityVolume& vol) {
  Histogram h;
  for (float p : vol.data()) ++h.bins[histogram_bin(p)];
  return h;
}

/// Between-class variance (in probability units) when bins 0..k form the lower
/// class. Zero when either class is empty.
inline double between_class_variance(const Histogram& h, std::size_t k) {
  double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
  for (std::size_t i = 0; i < kHistogramBins; ++i) {
    const double c = static_cast<double>(h.bins[i]);
    (i <= k ? n0 : n1) += c;
    (i <= k ? s0 : s1) += c * bin_center(i);
  }
  if (n0 == 0 || n1 == 0) return 0.0;
  const double n = n0 + n1;
  const double diff = s0 / n0 - s1 / n1;
  return (n0 / n) * (n1 / n) * diff * diff;
}

struct OtsuSplit {
  std::size_t bin = 0;     // last bin of the lower class
  double threshold = 0.0;  // centre of that bin
};

namespace detail {

// Score of split k, as the fraction num / den with
//   num = (N * S0 - S * n0)^2,  den = n0 * n1,
// where S0, S are level sums over bin indices. It equals the between-class
// variance times N^2 * 256^2, so the argmax is the same; integers keep the
// comparison exact.
struct SplitScore {
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;
};

// a.num / a.den > b.num / b.den without overflow: compare integer quotients,
// then the remainders, whose cross products stay below 2^128.
inline bool greater(const SplitScore& a, const SplitScore& b) {
  const auto qa = a.num / a.den, qb = b.num / b.den;
  if (qa != qb) return qa > qb;
  return (a.num % a.den) * b.den > (b.num % b.den) * a.den;
}

}  // namespace detail

/// Split maximizing between-class variance over the 256-bin histogram; ties go
/// to the lowest bin. Fewer than two occupied bins is degenerate.
inline OtsuSplit otsu_split(const Histogram& h) {
  std::uint64_t n = 0;
  std::uint64_t s = 0;
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < kHistogramBins; ++i) {
    n += h.bins[i];
    s += h.bins[i] * i;
    occupied += h.bins[i] != 0;
  }
  if (occupied < 2) {
    throw Error(ErrorKind::Degenerate, "Otsu needs at least two distinct histogram bins");
  }
  std::uint64_t n0 = 0, s0 = 0;
  std::optional<detail::SplitScore> best;
  std::size_t best_bin = 0;
  for (std::size_t k = 0; k + 1 < kHistogramBins; ++k) {
    n0 += h.bins[k];
    s0 += h.bins[k] * k;
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const auto lhs = static_cast<__int128>(n) * s0;
    const auto rhs = static_cast<__int128>(s) * n0;
    const auto diff = static_cast<unsigned __int128>(lhs > rhs ? lhs - rhs : rhs - lhs);
    const detail::SplitScore score{diff * diff, static_cast<unsigned __int128>(n0) * n1};
    if (!best || detail::greater(score, *best)) {
      best = score;
      best_bin = k;
    }
  }
  return {best_bin, bin_center(best_bin)};
}

inline double otsu_threshold(const ProbabilityVolume& vol) {
  if (vol.dims().empty()) throw Error(ErrorKind::Degenerate, "Otsu on an empty volume");
  return otsu_split(histogram(vol)).threshold;
}

/// Mask of voxels strictly above `threshold`.
inline BinaryMask threshold_mask(const ProbabilityVolume& vol, double threshold) {
  std::vector<std::uint8_t> out(vol.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(vol.data()[i]) > threshold;
  return BinaryMask(vol.dims(), std::move(out));
}

struct BaselineThresholds {
  double inner = 0.0;
  double outer = 0.0;
};

/// Otsu thresholds per channel, or the caller's fixed value for both.
inline BaselineThresholds baseline_thresholds(const ProbabilityVolume& inner, const ProbabilityVolume& outer,
                                              std::optional<double> fixed = std::nullopt) {
  require_same_dims(inner.dims(), outer.dims(), "baseline_reconstruct");
  if (fixed) return {*fixed, *fixed};
  return {otsu_threshold(inner), otsu_threshold(outer)};
}

inline LabelVolume baseline_reconstruct(const ProbabilityVolume& inner, const ProbabilityVolume& outer,
                                        std::optional<double> fixed = std::nullopt) {
  const auto t = baseline_thresholds(inner, outer, fixed);
  return merge_labels(threshold_mask(inner, t.inner), threshold_mask(outer, t.outer));
}

}  // namespace tbss
