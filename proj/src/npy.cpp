#include "umcam/npy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "umcam/error.hpp"

namespace umcam::io {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreambleLen = 10;  // magic + version + u16 header length

std::string where(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::string at_offset(const std::filesystem::path& path, std::size_t offset) {
  return where(path) + " at byte " + std::to_string(offset);
}

// Returns the text following `'key':` in the header dict, or throws.
std::string_view dict_value(std::string_view header, std::string_view key, const std::filesystem::path& path) {
  const std::string quoted = "'" + std::string(key) + "'";
  const auto pos = header.find(quoted);
  if (pos == std::string_view::npos) {
    throw FormatError("malformed NPY header in " + where(path) + ": missing key " + quoted);
  }
  auto rest = header.substr(pos + quoted.size());
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) throw FormatError("malformed NPY header in " + where(path));
  rest = rest.substr(colon + 1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  return rest;
}

NpyDtype parse_descr(std::string_view header, const std::filesystem::path& path) {
  auto v = dict_value(header, "descr", path);
  if (v.empty() || (v.front() != '\'' && v.front() != '"')) {
    throw FormatError("malformed NPY header in " + where(path) + ": descr is not a string");
  }
  const char quote = v.front();
  v.remove_prefix(1);
  const auto end = v.find(quote);
  if (end == std::string_view::npos) throw FormatError("malformed NPY header in " + where(path));
  const auto descr = v.substr(0, end);
  if (descr == "<f8") return NpyDtype::float64;
  if (descr == "<f4") return NpyDtype::float32;
  throw FormatError("unsupported dtype '" + std::string(descr) + "' in " + where(path) +
                    " (expected little-endian float32 or float64)");
}

bool parse_fortran(std::string_view header, const std::filesystem::path& path) {
  const auto v = dict_value(header, "fortran_order", path);
  if (v.starts_with("False")) return false;
  if (v.starts_with("True")) return true;
  throw FormatError("malformed NPY header in " + where(path) + ": bad fortran_order");
}

std::vector<std::size_t> parse_shape(std::string_view header, const std::filesystem::path& path) {
  auto v = dict_value(header, "shape", path);
  if (v.empty() || v.front() != '(') throw FormatError("malformed NPY header in " + where(path) + ": bad shape");
  const auto close = v.find(')');
  if (close == std::string_view::npos) throw FormatError("malformed NPY header in " + where(path) + ": bad shape");
  std::vector<std::size_t> shape;
  std::string_view body = v.substr(1, close - 1);
  while (!body.empty()) {
    while (!body.empty() && (body.front() == ' ' || body.front() == ',')) body.remove_prefix(1);
    if (body.empty()) break;
    std::size_t value = 0;
    std::size_t digits = 0;
    while (digits < body.size() && body[digits] >= '0' && body[digits] <= '9') {
      value = value * 10 + static_cast<std::size_t>(body[digits] - '0');
      ++digits;
    }
    if (digits == 0) throw FormatError("malformed NPY header in " + where(path) + ": bad shape entry");
    shape.push_back(value);
    body.remove_prefix(digits);
  }
  return shape;
}

std::string make_header(const std::vector<std::size_t>& shape, NpyDtype dtype) {
  std::ostringstream dict;
  dict << "{'descr': '" << (dtype == NpyDtype::float32 ? "<f4" : "<f8") << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    dict << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) dict << ",";
    if (i + 1 < shape.size()) dict << " ";
  }
  dict << "), }";
  std::string header = dict.str();
  // Pad with spaces so that preamble + header (incl. trailing newline) is 64-byte aligned.
  const std::size_t unpadded = kPreambleLen + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  return header;
}

}  // namespace

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + where(path));
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < kPreambleLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw FormatError("malformed NPY header in " + at_offset(path, 0) + ": bad magic string");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw FormatError("unsupported NPY version " + std::to_string(major) + "." + std::to_string(minor) + " in " +
                      at_offset(path, 6));
  }
  const std::size_t header_len =
      static_cast<std::size_t>(static_cast<unsigned char>(bytes[8])) |
      (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  const std::size_t data_offset = kPreambleLen + header_len;
  if (bytes.size() < data_offset) {
    throw FormatError("malformed NPY header in " + at_offset(path, 8) + ": header length exceeds file size");
  }
  const std::string_view header(bytes.data() + kPreambleLen, header_len);

  NpyArray out;
  out.dtype = parse_descr(header, path);
  if (parse_fortran(header, path)) {
    throw FormatError("Fortran-order array in " + where(path) + " is not supported (C-order only)");
  }
  out.shape = parse_shape(header, path);

  std::size_t count = 1;
  for (auto d : out.shape) count *= d;
  const std::size_t item = out.dtype == NpyDtype::float32 ? 4 : 8;
  if (bytes.size() - data_offset != count * item) {
    throw FormatError("payload size mismatch in " + at_offset(path, data_offset) + ": expected " +
                      std::to_string(count * item) + " bytes, found " + std::to_string(bytes.size() - data_offset));
  }

  out.data.resize(count);
  const char* payload = bytes.data() + data_offset;
  for (std::size_t i = 0; i < count; ++i) {
    double v;
    if (item == 4) {
      float f;
      std::memcpy(&f, payload + i * 4, 4);
      v = f;
    } else {
      std::memcpy(&v, payload + i * 8, 8);
    }
    if (!std::isfinite(v)) {
      throw FormatError("non-finite value in " + at_offset(path, data_offset + i * item));
    }
    out.data[i] = v;
  }
  return out;
}

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<double>& data, NpyDtype dtype) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  if (count != data.size()) throw ContractError("write_npy: shape does not match data size");

  const std::string header = make_header(shape, dtype);
  std::string bytes(kMagic, kMagicLen);
  bytes.push_back('\x01');
  bytes.push_back('\x00');
  bytes.push_back(static_cast<char>(header.size() & 0xff));
  bytes.push_back(static_cast<char>((header.size() >> 8) & 0xff));
  bytes += header;

  const std::size_t item = dtype == NpyDtype::float32 ? 4 : 8;
  const std::size_t base = bytes.size();
  bytes.resize(base + count * item);
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == NpyDtype::float32) {
      const auto f = static_cast<float>(data[i]);
      if (!std::isfinite(f)) throw ContractError("value at element " + std::to_string(i) + " overflows float32");
      std::memcpy(bytes.data() + base + i * 4, &f, 4);
    } else {
      std::memcpy(bytes.data() + base + i * 8, &data[i], 8);
    }
  }

  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + where(path));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + where(path));
}

std::variant<ScalarMap, ChannelStack> read_array(const std::filesystem::path& path) {
  auto arr = read_npy(path);
  if (arr.shape.size() == 2) {
    return ScalarMap(static_cast<int>(arr.shape[0]), static_cast<int>(arr.shape[1]), std::move(arr.data));
  }
  if (arr.shape.size() == 3) {
    if (arr.shape[0] < 1 || arr.shape[1] < 1 || arr.shape[2] < 1) {
      throw FormatError("empty 3D array in " + where(path));
    }
    return ChannelStack{static_cast<int>(arr.shape[0]), static_cast<int>(arr.shape[1]),
                        static_cast<int>(arr.shape[2]), std::move(arr.data)};
  }
  throw FormatError("expected a 2D or 3D array in " + where(path) + ", got " + std::to_string(arr.shape.size()) +
                    " dimensions");
}

ScalarMap read_map(const std::filesystem::path& path) {
  auto v = read_array(path);
  if (auto* m = std::get_if<ScalarMap>(&v)) return std::move(*m);
  throw FormatError("expected a 2D array in " + where(path));
}

BinaryMask read_mask(const std::filesystem::path& path) {
  try {
    return BinaryMask::from_map(read_map(path));
  } catch (const ContractError& e) {
    throw FormatError("mask file " + where(path) + ": " + e.what());
  }
}

ChannelStack read_stack(const std::filesystem::path& path) {
  auto v = read_array(path);
  if (auto* s = std::get_if<ChannelStack>(&v)) return std::move(*s);
  throw FormatError("expected a 3D (K x h x w) array in " + where(path));
}

FeatureBlockExport read_feature_export(const std::filesystem::path& features_path,
                                       const std::filesystem::path& gradients_path, int block_index,
                                       double class_score) {
  auto f = read_stack(features_path);
  auto g = read_stack(gradients_path);
  if (f.channels != g.channels || f.height != g.height || f.width != g.width) {
    throw FormatError("shape mismatch between features " + where(features_path) + " and gradients " +
                      where(gradients_path));
  }
  return FeatureBlockExport(block_index, f.channels, f.height, f.width, std::move(f.values), std::move(g.values),
                            class_score);
}

void write_map(const ScalarMap& map, const std::filesystem::path& path, NpyDtype dtype) {
  const auto v = map.values();
  write_npy(path, {static_cast<std::size_t>(map.height()), static_cast<std::size_t>(map.width())},
            std::vector<double>(v.begin(), v.end()), dtype);
}

void write_mask(const BinaryMask& mask, const std::filesystem::path& path, NpyDtype dtype) {
  write_map(mask.to_map(), path, dtype);
}

void write_stack(const ChannelStack& stack, const std::filesystem::path& path, NpyDtype dtype) {
  write_npy(path,
            {static_cast<std::size_t>(stack.channels), static_cast<std::size_t>(stack.height),
             static_cast<std::size_t>(stack.width)},
            stack.values, dtype);
}

}  // namespace umcam::io
