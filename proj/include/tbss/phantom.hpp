#pragma once

// Synthetic tube phantoms: two concentric-ish boundary rings per slice with
// known labels, plus degraded probability channels.
//
// Randomness comes from a counter-based SplitMix64 stream: the value for voxel
// i of channel c is a pure function of (seed, c, i), so output is identical on
// every platform and independent of evaluation order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbss/error.hpp"
#include "tbss/io.hpp"
#include "tbss/volume.hpp"

namespace tbss {

// ---- randomness --------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) for position `index` of stream `stream`.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t key = splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
  return static_cast<double>(splitmix64(key + index) >> 11) * 0x1.0p-53;
}

// ---- spec -------------------------------------------------------------------------------

/// Per-slice scalar profile (radius or centre offset, in voxels).
struct Profile {
  enum class Kind { Constant, Linear, Stenosis };
  Kind kind = Kind::Constant;
  double value = 0.0;  // constant value, or the unaffected value of a stenosis
  double from = 0.0;   // linear: value at the first slice
  double to = 0.0;     // linear: value at the last slice
  double depth = 0.0;  // stenosis: maximum reduction, reached at `center`
  double center = 0.0;
  double width = 1.0;  // stenosis: half-length in slices of the raised-cosine dip

  static Profile constant(double v) { return {Kind::Constant, v}; }
  static Profile linear(double a, double b) { return {Kind::Linear, 0.0, a, b}; }
  static Profile stenosis(double base, double depth, double center, double width) {
    return {Kind::Stenosis, base, 0.0, 0.0, depth, center, width};
  }

  double at(std::size_t n, std::size_t slices) const {
    switch (kind) {
      case Kind::Constant: return value;
      case Kind::Linear:
        if (slices <= 1) return from;
        return from + (to - from) * static_cast<double>(n) / static_cast<double>(slices - 1);
      case Kind::Stenosis: {
        const double u = (static_cast<double>(n) - center) / width;
        if (std::abs(u) >= 1.0) return value;
        return value - depth * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
      }
    }
    return value;
  }
};

/// Slices [first_slice, last_slice] of one channel whose boundary probability
/// is multiplied by `residual` (0 zeroes it) inside the angular range, measured
/// in degrees counterclockwise from the +col axis around the ring centre.
struct HoleSpec {
  Channel channel = Channel::Outer;
  std::size_t first_slice = 0;
  std::size_t last_slice = 0;
  double angle_from = 0.0;
  double angle_to = 360.0;
  double residual = 0.0;

  bool covers_slice(std::size_t n) const { return n >= first_slice && n <= last_slice; }

  bool covers_angle(double deg) const {
    if (angle_to - angle_from >= 360.0) return true;
    const double span = angle_to - angle_from;
    double rel = std::fmod(deg - angle_from, 360.0);
    if (rel < 0) rel += 360.0;
    return rel <= span;
  }
};

struct PhantomSpec {
  Dims dims{64, 96, 96};
  Profile inner_radius = Profile::constant(12.0);
  Profile outer_radius = Profile::constant(20.0);
  // Column offset of the inner ring centre from the outer ring centre.
  Profile eccentricity = Profile::constant(0.0);
  double blur_sigma = 0.0;
  double noise_amp = 0.0;
  std::vector<HoleSpec> holes;
  std::uint64_t seed = 0;

  void validate() const {
    if (dims.slices < 1 || dims.rows < 1 || dims.cols < 1) {
      throw Error(ErrorKind::InvalidArgument, "phantom dims must be positive, got " + to_string(dims));
    }
    const double limit = static_cast<double>(std::min(dims.rows, dims.cols)) / 2.0;
    for (std::size_t n = 0; n < dims.slices; ++n) {
      const double ri = inner_radius.at(n, dims.slices);
      const double ro = outer_radius.at(n, dims.slices);
      const double e = eccentricity.at(n, dims.slices);
      if (!(ri > 0.0 && ri < ro && ro < limit) || !std::isfinite(e)) {
        throw Error(ErrorKind::InvalidArgument,
                    "slice " + std::to_string(n) + ": need 0 < inner radius < outer radius < " +
                        std::to_string(limit) + ", got " + std::to_string(ri) + " and " + std::to_string(ro));
      }
      if (std::abs(e) + ri >= limit) {
        throw Error(ErrorKind::InvalidArgument, "slice " + std::to_string(n) + ": eccentric inner ring leaves the image");
      }
    }
    if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) {
      throw Error(ErrorKind::InvalidArgument, "blur_sigma must be finite and >= 0");
    }
    if (!(noise_amp >= 0.0 && noise_amp <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "noise_amp must lie in [0, 1]");
    }
    for (const auto& h : holes) {
      if (h.first_slice > h.last_slice || h.last_slice >= dims.slices) {
        throw Error(ErrorKind::InvalidArgument, "hole slice range outside the volume");
      }
      if (!(h.residual >= 0.0 && h.residual <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "hole residual must lie in [0, 1]");
      }
      if (!std::isfinite(h.angle_from) || !std::isfinite(h.angle_to) || h.angle_to < h.angle_from) {
        throw Error(ErrorKind::InvalidArgument, "hole angles must be finite with angle_from <= angle_to");
      }
    }
  }
};

struct Phantom {
  ProbabilityVolume inner;
  ProbabilityVolume outer;
  LabelVolume gt;
  SliceMeta meta;
};

// ---- geometry -----------------------------------------------------------------------------

struct RingCenter {
  double row = 0.0;
  double col = 0.0;
};

/// Midpoint-circle raster of radius round(radius) around an integer centre; a
/// closed 8-connected one-pixel ring. Pixels outside the image are dropped.
inline void draw_circle(std::vector<std::uint8_t>& plane, std::size_t rows, std::size_t cols, int cr, int cc,
                        double radius) {
  const int r = static_cast<int>(std::lround(radius));
  auto plot = [&](int y, int x) {
    if (y >= 0 && x >= 0 && y < static_cast<int>(rows) && x < static_cast<int>(cols)) {
      plane[static_cast<std::size_t>(y) * cols + static_cast<std::size_t>(x)] = 1;
    }
  };
  int x = r, y = 0, err = 1 - r;
  while (x >= y) {
    plot(cr + y, cc + x);
    plot(cr + x, cc + y);
    plot(cr + x, cc - y);
    plot(cr + y, cc - x);
    plot(cr - y, cc - x);
    plot(cr - x, cc - y);
    plot(cr - x, cc + y);
    plot(cr - y, cc + x);
    ++y;
    if (err < 0) {
      err += 2 * y + 1;
    } else {
      --x;
      err += 2 * (y - x) + 1;
    }
  }
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    sum += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  for (auto& w : k) w /= sum;
  return k;
}

/// Separable Gaussian truncated at 3 sigma with zero padding. The result is
/// scaled so that every ring pixel reaches at least `level`; values above 1 are
/// left for the final clamp. A 1-px ring blurs to a lower ridge along diagonal runs than along axis
/// runs, so scaling by the weakest ring pixel keeps the ridge closed.
inline void blur_plane(std::vector<double>& plane, std::size_t rows, std::size_t cols, double sigma,
                       double level = 1.0) {
  if (sigma <= 0.0) return;
  const std::vector<double> indicator = plane;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(plane.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const auto cc = static_cast<std::ptrdiff_t>(c) + t;
        if (cc >= 0 && cc < static_cast<std::ptrdiff_t>(cols))
          acc += k[static_cast<std::size_t>(t + radius)] * plane[r * cols + static_cast<std::size_t>(cc)];
      }
      tmp[r * cols + c] = acc;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const auto rr = static_cast<std::ptrdiff_t>(r) + t;
        if (rr >= 0 && rr < static_cast<std::ptrdiff_t>(rows))
          acc += k[static_cast<std::size_t>(t + radius)] * tmp[static_cast<std::size_t>(rr) * cols + c];
      }
      plane[r * cols + c] = acc;
    }
  }
  double ridge = 0.0;
  for (std::size_t i = 0; i < plane.size(); ++i) {
    if (indicator[i] > 0.0 && (ridge == 0.0 || plane[i] < ridge)) ridge = plane[i];
  }
  if (ridge > 0.0) {
    for (auto& v : plane) v *= level / ridge;
  }
}

inline double angle_deg(double row, double col, const RingCenter& c) {
  double a = std::atan2(-(row - c.row), col - c.col) * 180.0 / std::numbers::pi;
  if (a < 0) a += 360.0;
  return a;
}

/// Hole attenuation then additive uniform noise, clamped to [0, 1], on a
/// double-precision working copy of one channel.
inline void corrupt_values(std::vector<double>& values, const Dims& dims, std::span<const HoleSpec> holes,
                           double noise_amp, std::uint64_t seed, std::uint64_t stream,
                           std::span<const RingCenter> centers) {
  const std::size_t plane = dims.slice_size();
  for (const auto& h : holes) {
    for (std::size_t n = h.first_slice; n <= h.last_slice && n < dims.slices; ++n) {
      const RingCenter c = n < centers.size()
                               ? centers[n]
                               : RingCenter{static_cast<double>(dims.rows / 2), static_cast<double>(dims.cols / 2)};
      for (std::size_t r = 0; r < dims.rows; ++r) {
        for (std::size_t col = 0; col < dims.cols; ++col) {
          if (h.covers_angle(angle_deg(static_cast<double>(r), static_cast<double>(col), c))) {
            values[n * plane + r * dims.cols + col] *= h.residual;
          }
        }
      }
    }
  }
  if (noise_amp > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] += noise_amp * (2.0 * counter_uniform(seed, stream, i) - 1.0);
    }
  }
  for (auto& v : values) v = std::clamp(v, 0.0, 1.0);
}

inline ProbabilityVolume to_probability(const Dims& dims, const std::vector<double>& values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  return ProbabilityVolume(dims, std::move(out));
}

}  // namespace detail

/// Applies holes (about the image centre unless centres are given per slice)
/// and then uniform noise in [-noise_amp, noise_amp], clamped to [0, 1].
inline ProbabilityVolume corrupt(const ProbabilityVolume& vol, std::span<const HoleSpec> holes, double noise_amp,
                                 std::uint64_t seed, std::span<const RingCenter> centers = {}) {
  std::vector<double> values(vol.data().begin(), vol.data().end());
  detail::corrupt_values(values, vol.dims(), holes, noise_amp, seed, 0, centers);
  return detail::to_probability(vol.dims(), values);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Ground-truth rings, degraded probability channels and health flags. With
/// blur, the ring is scaled to 1 + noise_amp so it still clamps to 1 after
/// noise while its blurred shoulders stay graded.
inline Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  const Dims& d = spec.dims;
  const std::size_t plane = d.slice_size();
  const int cr = static_cast<int>(d.rows / 2);
  const int cc = static_cast<int>(d.cols / 2);

  std::vector<std::uint8_t> labels(d.size(), 0);
  std::vector<RingCenter> inner_centers(d.slices), outer_centers(d.slices);
  std::vector<double> ri(d.slices), ro(d.slices);
  for (std::size_t n = 0; n < d.slices; ++n) {
    ri[n] = spec.inner_radius.at(n, d.slices);
    ro[n] = spec.outer_radius.at(n, d.slices);
    const int ic = cc + static_cast<int>(std::lround(spec.eccentricity.at(n, d.slices)));
    inner_centers[n] = {static_cast<double>(cr), static_cast<double>(ic)};
    outer_centers[n] = {static_cast<double>(cr), static_cast<double>(cc)};

    std::vector<std::uint8_t> inner_ring(plane, 0), outer_ring(plane, 0);
    draw_circle(inner_ring, d.rows, d.cols, cr, ic, ri[n]);
    draw_circle(outer_ring, d.rows, d.cols, cr, cc, ro[n]);
    for (std::size_t i = 0; i < plane; ++i) {
      labels[n * plane + i] = inner_ring[i] ? 1 : (outer_ring[i] ? 2 : 0);
    }
  }
  LabelVolume gt(d, std::move(labels));

  auto channel = [&](Channel ch) {
    const auto want = static_cast<std::uint8_t>(label_of(ch));
    std::vector<double> values(d.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = gt.data()[i] == want ? 1.0 : 0.0;
    for (std::size_t n = 0; n < d.slices; ++n) {
      std::vector<double> slab(values.begin() + static_cast<std::ptrdiff_t>(n * plane),
                               values.begin() + static_cast<std::ptrdiff_t>((n + 1) * plane));
      detail::blur_plane(slab, d.rows, d.cols, spec.blur_sigma, 1.0 + spec.noise_amp);
      std::copy(slab.begin(), slab.end(), values.begin() + static_cast<std::ptrdiff_t>(n * plane));
    }
    std::vector<HoleSpec> own;
    for (const auto& h : spec.holes) {
      if (h.channel == ch) own.push_back(h);
    }
    detail::corrupt_values(values, d, own, spec.noise_amp, spec.seed, ch == Channel::Inner ? 1 : 2,
                           ch == Channel::Inner ? inner_centers : outer_centers);
    return detail::to_probability(d, values);
  };

  SliceMeta meta;
  meta.healthy.assign(d.slices, true);
  const double mi = median(ri), mo = median(ro);
  for (std::size_t n = 0; n < d.slices; ++n) {
    if (std::abs(ri[n] - mi) > 0.1 * mi || std::abs(ro[n] - mo) > 0.1 * mo) meta.healthy[n] = false;
  }
  for (const auto& h : spec.holes) {
    for (std::size_t n = h.first_slice; n <= h.last_slice; ++n) meta.healthy[n] = false;
  }

  return Phantom{channel(Channel::Inner), channel(Channel::Outer), std::move(gt), std::move(meta)};
}

// ---- JSON ------------------------------------------------------------------------

namespace detail {

inline double number_field(const nlohmann::json& j, const char* key, std::optional<double> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw Error(ErrorKind::Format, std::string("missing field \"") + key + "\"");
  }
  if (!j.at(key).is_number()) throw Error(ErrorKind::Format, std::string("field \"") + key + "\" must be a number");
  return j.at(key).get<double>();
}

inline Profile profile_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Profile::constant(j.get<double>());
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(ErrorKind::Format, "profile must be a number or an object with a \"kind\"");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") return Profile::constant(number_field(j, "value"));
  if (kind == "linear") return Profile::linear(number_field(j, "from"), number_field(j, "to"));
  if (kind == "stenosis") {
    const double width = number_field(j, "width");
    if (!(width > 0.0)) throw Error(ErrorKind::Format, "stenosis width must be positive");
    return Profile::stenosis(number_field(j, "base"), number_field(j, "depth"), number_field(j, "center"), width);
  }
  throw Error(ErrorKind::Format, "unknown profile kind \"" + kind + "\"");
}

inline nlohmann::json profile_to_json(const Profile& p) {
  switch (p.kind) {
    case Profile::Kind::Constant: return {{"kind", "constant"}, {"value", p.value}};
    case Profile::Kind::Linear: return {{"kind", "linear"}, {"from", p.from}, {"to", p.to}};
    case Profile::Kind::Stenosis:
      return {{"kind", "stenosis"}, {"base", p.value}, {"depth", p.depth}, {"center", p.center}, {"width", p.width}};
  }
  return nullptr;
}

inline std::size_t index_field(const nlohmann::json& j) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw Error(ErrorKind::Format, "expected a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace detail

/// {"dims": [N, H, W], "inner_radius": <profile>, "outer_radius": <profile>,
///  "eccentricity": <profile>, "blur_sigma": s, "noise_amp": a, "seed": k,
///  "holes": [{"channel": "outer", "slices": [first, last], "angles": [from, to],
///             "residual": r}]}
/// A profile is a number or {"kind": "constant"|"linear"|"stenosis", ...}.
inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "phantom spec must be a JSON object");
  PhantomSpec s;
  if (!j.contains("dims") || !j.at("dims").is_array() || j.at("dims").size() != 3) {
    throw Error(ErrorKind::Format, "\"dims\" must be [N, H, W]");
  }
  const auto& d = j.at("dims");
  s.dims = {detail::index_field(d[0]), detail::index_field(d[1]), detail::index_field(d[2])};
  auto radius = [&](const char* key, const char* alias, const Profile& fallback) {
    if (j.contains(key)) return detail::profile_from_json(j.at(key));
    if (j.contains(alias)) return detail::profile_from_json(j.at(alias));
    return fallback;
  };
  s.inner_radius = radius("inner_radius", "inner_radius_profile", s.inner_radius);
  s.outer_radius = radius("outer_radius", "outer_radius_profile", s.outer_radius);
  if (j.contains("eccentricity")) s.eccentricity = detail::profile_from_json(j.at("eccentricity"));
  s.blur_sigma = detail::number_field(j, "blur_sigma", 0.0);
  s.noise_amp = detail::number_field(j, "noise_amp", 0.0);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw Error(ErrorKind::Format, "\"seed\" must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("holes")) {
    if (!j.at("holes").is_array()) throw Error(ErrorKind::Format, "\"holes\" must be an array");
    for (const auto& h : j.at("holes")) {
      if (!h.is_object()) throw Error(ErrorKind::Format, "hole must be an object");
      HoleSpec hole;
      const auto ch = h.value("channel", std::string("outer"));
      if (ch != "inner" && ch != "outer") throw Error(ErrorKind::Format, "hole channel must be inner or outer");
      hole.channel = ch == "inner" ? Channel::Inner : Channel::Outer;
      if (!h.contains("slices") || !h.at("slices").is_array() || h.at("slices").size() != 2) {
        throw Error(ErrorKind::Format, "hole \"slices\" must be [first, last]");
      }
      hole.first_slice = detail::index_field(h.at("slices")[0]);
      hole.last_slice = detail::index_field(h.at("slices")[1]);
      if (h.contains("angles")) {
        const auto& a = h.at("angles");
        if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
          throw Error(ErrorKind::Format, "hole \"angles\" must be [from, to] in degrees");
        }
        hole.angle_from = a[0].get<double>();
        hole.angle_to = a[1].get<double>();
      }
      hole.residual = detail::number_field(h, "residual", 0.0);
      s.holes.push_back(hole);
    }
  }
  return s;
}

inline nlohmann::json phantom_spec_to_json(const PhantomSpec& s) {
  nlohmann::json holes = nlohmann::json::array();
  for (const auto& h : s.holes) {
    holes.push_back({{"channel", to_string(h.channel)},
                     {"slices", {h.first_slice, h.last_slice}},
                     {"angles", {h.angle_from, h.angle_to}},
                     {"residual", h.residual}});
  }
  return {{"dims", {s.dims.slices, s.dims.rows, s.dims.cols}},
          {"inner_radius", detail::profile_to_json(s.inner_radius)},
          {"outer_radius", detail::profile_to_json(s.outer_radius)},
          {"eccentricity", detail::profile_to_json(s.eccentricity)},
          {"blur_sigma", s.blur_sigma},
          {"noise_amp", s.noise_amp},
          {"holes", std::move(holes)},
          {"seed", s.seed}};
}

inline PhantomSpec load_phantom_spec(const std::filesystem::path& p) { return phantom_spec_from_json(read_json(p)); }

}  // namespace tbss
