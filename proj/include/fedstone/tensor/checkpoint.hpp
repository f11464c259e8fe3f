#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedstone/errors.hpp"
#include "fedstone/io.hpp"
#include "fedstone/tensor/parameter_vector.hpp"

// Checkpoint layout:
//   8 bytes   magic "FSTCKPT1"
//   8 bytes   little-endian u64 length N of the layout descriptor
//   N bytes   descriptor, "name:d0xd1;name:d0;..."
//   8*P bytes little-endian IEEE-754 binary64 parameter values

namespace fedstone {

inline constexpr std::string_view kCheckpointMagic = "FSTCKPT1";

inline std::string describe_layout(const Layout& layout) {
  std::string out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (i) out += ';';
    out += layout[i].name;
    out += ':';
    for (std::size_t d = 0; d < layout[i].dims.size(); ++d) {
      if (d) out += 'x';
      out += std::to_string(layout[i].dims[d]);
    }
  }
  return out;
}

inline Layout parse_layout(std::string_view text) {
  Layout layout;
  if (text.empty()) return layout;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(';', pos), text.size());
    const std::string_view entry = text.substr(pos, end - pos);
    const std::size_t colon = entry.rfind(':');
    if (colon == std::string_view::npos || colon == 0)
      throw InputError("malformed layout entry '" + std::string(entry) + "'");
    TensorShape shape{std::string(entry.substr(0, colon)), {}};
    std::string_view dims = entry.substr(colon + 1);
    std::size_t dpos = 0;
    while (dpos <= dims.size()) {
      const std::size_t dend = std::min(dims.find('x', dpos), dims.size());
      const std::string tok(dims.substr(dpos, dend - dpos));
      if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw InputError("malformed layout dimension '" + tok + "'");
      shape.dims.push_back(std::stoull(tok));
      dpos = dend + 1;
    }
    layout.push_back(std::move(shape));
    pos = end + 1;
  }
  return layout;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const ParameterVector& params) {
  const std::string desc = describe_layout(params.layout);
  std::string out;
  out.reserve(16 + desc.size() + 8 * params.values.size());
  out += kCheckpointMagic;
  detail::put_u64(out, desc.size());
  out += desc;
  for (double v : params.values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline ParameterVector decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kCheckpointMagic)
    throw InputError("not a checkpoint: bad magic");
  const std::uint64_t desc_len = detail::get_u64(bytes, 8);
  if (desc_len > bytes.size() - 16) throw InputError("truncated checkpoint descriptor");
  Layout layout = parse_layout(bytes.substr(16, desc_len));
  const std::size_t n = layout_numel(layout);
  const std::size_t data_at = 16 + desc_len;
  if (bytes.size() - data_at != 8 * n)
    throw InputError("checkpoint payload size does not match layout");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = std::bit_cast<double>(detail::get_u64(bytes, data_at + 8 * i));
  return ParameterVector(std::move(layout), std::move(values));
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const ParameterVector& params) {
  write_file_atomic(path, encode_checkpoint(params));
}

inline ParameterVector load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace fedstone
