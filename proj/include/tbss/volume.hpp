#pragma once

// Volumetric data model. Every volume is indexed (slice, row, col), row-major
// and slice-major, and is immutable once constructed.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tbss/error.hpp"

namespace tbss {

struct Dims {
  std::size_t slices = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t slice_size() const noexcept { return rows * cols; }
  std::size_t size() const noexcept { return slices * rows * cols; }
  bool empty() const noexcept { return size() == 0; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return "(" + std::to_string(d.slices) + ", " + std::to_string(d.rows) + ", " +
         std::to_string(d.cols) + ")";
}

struct VoxelCoord {
  std::size_t slice = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

enum class PayloadKind : std::uint8_t { Probability = 0, Label = 1, Mask = 2 };

enum class Label : std::uint8_t { Background = 0, Inner = 1, Outer = 2 };

/// Boundary channel; each has its own probability volume.
enum class Channel : std::uint8_t { Inner, Outer };

inline const char* to_string(Channel c) { return c == Channel::Inner ? "inner" : "outer"; }
inline Label label_of(Channel c) { return c == Channel::Inner ? Label::Inner : Label::Outer; }

namespace detail {

template <PayloadKind K>
struct PayloadTraits;

template <>
struct PayloadTraits<PayloadKind::Probability> {
  using value_type = float;
  static constexpr const char* name = "probability";
  // NaN fails both comparisons.
  static bool valid(float v) noexcept { return v >= 0.0f && v <= 1.0f; }
};

template <>
struct PayloadTraits<PayloadKind::Label> {
  using value_type = std::uint8_t;
  static constexpr const char* name = "label";
  static bool valid(std::uint8_t v) noexcept { return v <= 2; }
};

template <>
struct PayloadTraits<PayloadKind::Mask> {
  using value_type = std::uint8_t;
  static constexpr const char* name = "mask";
  static bool valid(std::uint8_t v) noexcept { return v <= 1; }
};

inline std::string describe_value(float v) { return std::to_string(v); }
inline std::string describe_value(std::uint8_t v) { return std::to_string(unsigned{v}); }

}  // namespace detail

/// Dense N x H x W volume whose payload kind fixes both the element type and
/// the admissible value set. Construction validates every element.
template <PayloadKind K>
class Volume {
 public:
  using traits = detail::PayloadTraits<K>;
  using value_type = typename traits::value_type;
  static constexpr PayloadKind kind = K;

  Volume() = default;

  /// Zero-filled volume.
  explicit Volume(Dims dims) : dims_(dims), data_(dims.size(), value_type{}) {}

  Volume(Dims dims, std::vector<value_type> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.size()) {
      throw Error(ErrorKind::DimensionMismatch,
                  std::string(traits::name) + " volume " + to_string(dims_) + " needs " +
                      std::to_string(dims_.size()) + " values, got " +
                      std::to_string(data_.size()));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!traits::valid(data_[i])) {
        throw Error(ErrorKind::OutOfRange, std::string(traits::name) + " value " +
                                               detail::describe_value(data_[i]) +
                                               " at flat index " + std::to_string(i));
      }
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::span<const value_type> data() const noexcept { return data_; }

  std::size_t index(std::size_t slice, std::size_t row, std::size_t col) const noexcept {
    return (slice * dims_.rows + row) * dims_.cols + col;
  }

  value_type operator()(std::size_t slice, std::size_t row, std::size_t col) const noexcept {
    return data_[index(slice, row, col)];
  }
  value_type operator()(const VoxelCoord& v) const noexcept { return (*this)(v.slice, v.row, v.col); }

  std::span<const value_type> slice(std::size_t n) const noexcept {
    return std::span<const value_type>(data_).subspan(n * dims_.slice_size(), dims_.slice_size());
  }

  /// Copies slices [first, last), optionally in reverse order.
  Volume slices(std::size_t first, std::size_t last, bool reversed = false) const {
    if (first > last || last > dims_.slices) {
      throw Error(ErrorKind::InvalidArgument, "slice range [" + std::to_string(first) + ", " +
                                                  std::to_string(last) + ") outside volume " +
                                                  to_string(dims_));
    }
    Dims out{last - first, dims_.rows, dims_.cols};
    std::vector<value_type> buf;
    buf.reserve(out.size());
    for (std::size_t k = 0; k < out.slices; ++k) {
      auto src = slice(reversed ? last - 1 - k : first + k);
      buf.insert(buf.end(), src.begin(), src.end());
    }
    return Volume(out, std::move(buf));
  }

  friend bool operator==(const Volume& a, const Volume& b) {
    if (a.dims_ != b.dims_) return false;
    if constexpr (std::is_floating_point_v<value_type>) {
      // Bitwise, so that +0/-0 and payload bits are compared exactly.
      for (std::size_t i = 0; i < a.data_.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(a.data_[i]) != std::bit_cast<std::uint32_t>(b.data_[i]))
          return false;
      }
      return true;
    } else {
      return a.data_ == b.data_;
    }
  }

 private:
  Dims dims_{};
  std::vector<value_type> data_;
};

using ProbabilityVolume = Volume<PayloadKind::Probability>;
using LabelVolume = Volume<PayloadKind::Label>;
using BinaryMask = Volume<PayloadKind::Mask>;

enum class Health : std::uint8_t { Healthy, Unhealthy };

struct SliceMeta {
  std::vector<bool> healthy;

  std::size_t size() const noexcept { return healthy.size(); }
  Health health(std::size_t n) const { return healthy.at(n) ? Health::Healthy : Health::Unhealthy; }

  friend bool operator==(const SliceMeta&, const SliceMeta&) = default;
};

struct VoxelSpacing {
  double in_plane_mm = 0.06;
  double between_slice_mm = 0.8;

  void validate() const {
    if (!(in_plane_mm > 0.0) || !(between_slice_mm > 0.0) || !std::isfinite(in_plane_mm) ||
        !std::isfinite(between_slice_mm)) {
      throw Error(ErrorKind::OutOfRange, "voxel spacing must be finite and strictly positive");
    }
  }

  friend bool operator==(const VoxelSpacing&, const VoxelSpacing&) = default;
};

inline void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
  }
}

/// Inner mask is set exactly where the label is Inner, outer mask exactly where
/// it is Outer.
inline std::pair<BinaryMask, BinaryMask> split_channels(const LabelVolume& labels) {
  const auto src = labels.data();
  std::vector<std::uint8_t> inner(src.size()), outer(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    inner[i] = src[i] == static_cast<std::uint8_t>(Label::Inner);
    outer[i] = src[i] == static_cast<std::uint8_t>(Label::Outer);
  }
  return {BinaryMask(labels.dims(), std::move(inner)), BinaryMask(labels.dims(), std::move(outer))};
}

/// Combines two channel masks under the inner > outer > background priority.
inline LabelVolume merge_labels(const BinaryMask& inner, const BinaryMask& outer) {
  require_same_dims(inner.dims(), outer.dims(), "merge_labels");
  const auto a = inner.data();
  const auto b = outer.data();
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] ? static_cast<std::uint8_t>(Label::Inner)
                  : (b[i] ? static_cast<std::uint8_t>(Label::Outer)
                          : static_cast<std::uint8_t>(Label::Background));
  }
  return LabelVolume(inner.dims(), std::move(out));
}

inline BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a.dims(), b.dims(), "mask_union");
  std::vector<std::uint8_t> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] | b.data()[i];
  return BinaryMask(a.dims(), std::move(out));
}

inline bool is_subset(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a.dims(), b.dims(), "is_subset");
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    if (a.data()[i] && !b.data()[i]) return false;
  }
  return true;
}

inline std::size_t count_set(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v;
  return n;
}

}  // namespace tbss
