#pragma once

// TBV container and JSON side files.
//
// TBV layout, all integers little-endian:
//   bytes 0..3   magic "TBV1"
//   byte  4      payload kind (0 float32 probability, 1 u8 label, 2 u8 mask)
//   bytes 5..7   reserved, must be zero
//   bytes 8..19  N, H, W as u32
//   then N*H*W payload values, slice-major, row-major within a slice.

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tbss/error.hpp"
#include "tbss/volume.hpp"

namespace tbss {

inline constexpr std::array<char, 4> kTbvMagic{'T', 'B', 'V', '1'};
inline constexpr std::size_t kTbvHeaderSize = 20;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Io, "read failed for " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

struct TbvHeader {
  PayloadKind kind;
  Dims dims;
};

inline std::size_t element_size(PayloadKind kind) { return kind == PayloadKind::Probability ? 4 : 1; }

inline TbvHeader parse_header(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < kTbvHeaderSize) {
    throw Error(ErrorKind::Format, name + ": header needs " + std::to_string(kTbvHeaderSize) +
                                       " bytes, file has " + std::to_string(bytes.size()));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kTbvMagic[i]))
      throw Error(ErrorKind::Format, name + ": bad magic, expected TBV1");
  }
  if (bytes[4] > 2) {
    throw Error(ErrorKind::Format, name + ": unknown payload kind " + std::to_string(bytes[4]));
  }
  if (bytes[5] != 0 || bytes[6] != 0 || bytes[7] != 0) {
    throw Error(ErrorKind::Format, name + ": reserved header bytes are not zero");
  }
  TbvHeader h{static_cast<PayloadKind>(bytes[4]),
              Dims{get_u32(&bytes[8]), get_u32(&bytes[12]), get_u32(&bytes[16])}};
  return h;
}

template <PayloadKind K>
Volume<K> decode_payload(const std::vector<std::uint8_t>& bytes, const TbvHeader& h,
                         const std::string& name) {
  using T = typename Volume<K>::value_type;
  const std::size_t have = bytes.size() - kTbvHeaderSize;
  const unsigned __int128 wide = static_cast<unsigned __int128>(h.dims.slices) * h.dims.rows *
                                 h.dims.cols * element_size(K);
  if (wide > have) {
    throw Error(ErrorKind::Truncated, name + ": header " + to_string(h.dims) + " needs more than the " +
                                          std::to_string(have) + " payload bytes present");
  }
  const std::size_t n = h.dims.size();
  const std::size_t need = n * element_size(K);
  if (have < need) {
    throw Error(ErrorKind::Truncated, name + ": header promises " + std::to_string(n) +
                                          " values (" + std::to_string(need) + " bytes), payload has " +
                                          std::to_string(have) + " bytes");
  }
  if (have > need) {
    throw Error(ErrorKind::TrailingData,
                name + ": " + std::to_string(have - need) + " bytes after the declared payload");
  }
  std::vector<T> data(n);
  const std::uint8_t* p = bytes.data() + kTbvHeaderSize;
  if constexpr (K == PayloadKind::Probability) {
    for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  } else {
    std::copy(p, p + n, data.begin());
  }
  return Volume<K>(h.dims, std::move(data));
}

}  // namespace detail

template <PayloadKind K>
std::vector<std::uint8_t> encode_tbv(const Volume<K>& vol) {
  const Dims& d = vol.dims();
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (d.slices > kMax || d.rows > kMax || d.cols > kMax) {
    throw Error(ErrorKind::InvalidArgument, "dimension exceeds u32 range: " + to_string(d));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kTbvHeaderSize + d.size() * detail::element_size(K));
  out.insert(out.end(), kTbvMagic.begin(), kTbvMagic.end());
  out.push_back(static_cast<std::uint8_t>(K));
  out.insert(out.end(), 3, 0);
  detail::put_u32(out, static_cast<std::uint32_t>(d.slices));
  detail::put_u32(out, static_cast<std::uint32_t>(d.rows));
  detail::put_u32(out, static_cast<std::uint32_t>(d.cols));
  if constexpr (K == PayloadKind::Probability) {
    for (float v : vol.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  } else {
    out.insert(out.end(), vol.data().begin(), vol.data().end());
  }
  return out;
}

template <PayloadKind K>
void save_tbv(const Volume<K>& vol, const std::filesystem::path& path) {
  const auto bytes = encode_tbv(vol);
  detail::write_file(path, bytes.data(), bytes.size());
}

/// Loads a TBV file that must carry payload kind K.
template <PayloadKind K>
Volume<K> load_tbv(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto header = detail::parse_header(bytes, path.string());
  if (header.kind != K) {
    throw Error(ErrorKind::Format,
                path.string() + ": payload kind " + std::to_string(static_cast<int>(header.kind)) +
                    ", expected " + std::to_string(static_cast<int>(K)));
  }
  return detail::decode_payload<K>(bytes, header, path.string());
}

using AnyVolume = std::variant<ProbabilityVolume, LabelVolume, BinaryMask>;

/// Loads a TBV file of whatever payload kind its header declares.
inline AnyVolume load_any_tbv(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto header = detail::parse_header(bytes, path.string());
  switch (header.kind) {
    case PayloadKind::Probability:
      return detail::decode_payload<PayloadKind::Probability>(bytes, header, path.string());
    case PayloadKind::Label:
      return detail::decode_payload<PayloadKind::Label>(bytes, header, path.string());
    case PayloadKind::Mask:
      return detail::decode_payload<PayloadKind::Mask>(bytes, header, path.string());
  }
  throw Error(ErrorKind::Format, path.string() + ": unknown payload kind");
}

inline ProbabilityVolume load_probability_volume(const std::filesystem::path& p) {
  return load_tbv<PayloadKind::Probability>(p);
}
inline LabelVolume load_label_volume(const std::filesystem::path& p) {
  return load_tbv<PayloadKind::Label>(p);
}
inline BinaryMask load_mask(const std::filesystem::path& p) { return load_tbv<PayloadKind::Mask>(p); }

inline void save_probability_volume(const ProbabilityVolume& v, const std::filesystem::path& p) {
  save_tbv(v, p);
}
inline void save_label_volume(const LabelVolume& v, const std::filesystem::path& p) { save_tbv(v, p); }
inline void save_mask(const BinaryMask& v, const std::filesystem::path& p) { save_tbv(v, p); }

// ---- JSON side files -------------------------------------------------------

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  const std::string text = j.dump(2) + "\n";
  detail::write_file(path, text.data(), text.size());
}

inline nlohmann::json to_json(const SliceMeta& meta) {
  nlohmann::json arr = nlohmann::json::array();
  for (bool h : meta.healthy) arr.push_back(h);
  return nlohmann::json{{"healthy", arr}};
}

inline SliceMeta slice_meta_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("healthy") || !j.at("healthy").is_array()) {
    throw Error(ErrorKind::Format, "slice meta needs an object with a \"healthy\" array");
  }
  SliceMeta meta;
  for (const auto& v : j.at("healthy")) {
    if (!v.is_boolean()) throw Error(ErrorKind::Format, "\"healthy\" entries must be booleans");
    meta.healthy.push_back(v.get<bool>());
  }
  return meta;
}

inline SliceMeta load_slice_meta(const std::filesystem::path& p) { return slice_meta_from_json(read_json(p)); }
inline void save_slice_meta(const SliceMeta& meta, const std::filesystem::path& p) {
  write_json(to_json(meta), p);
}

inline nlohmann::json to_json(const VoxelSpacing& s) {
  return nlohmann::json{{"in_plane_mm", s.in_plane_mm}, {"between_slice_mm", s.between_slice_mm}};
}

inline VoxelSpacing voxel_spacing_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("in_plane_mm") || !j.contains("between_slice_mm") ||
      !j.at("in_plane_mm").is_number() || !j.at("between_slice_mm").is_number()) {
    throw Error(ErrorKind::Format, "spacing needs numeric in_plane_mm and between_slice_mm");
  }
  VoxelSpacing s{j.at("in_plane_mm").get<double>(), j.at("between_slice_mm").get<double>()};
  s.validate();
  return s;
}

inline VoxelSpacing load_voxel_spacing(const std::filesystem::path& p) {
  return voxel_spacing_from_json(read_json(p));
}
inline void save_voxel_spacing(const VoxelSpacing& s, const std::filesystem::path& p) {
  s.validate();
  write_json(to_json(s), p);
}

}  // namespace tbss
