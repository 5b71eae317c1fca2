/// @file checkpoint.hpp
/// @brief Binary parameter container.
///
/// Layout (little-endian):
///   "DOBNETCK"                 8-byte magic
///   u32 format_version
///   u32 len, bytes             architecture descriptor
///   u32 block_count
///   u8  has_optimizer_state
///   per block:
///     u32 len, bytes           block name
///     u64 rows, u64 cols
///     f64[rows*cols]           values, row-major
///     f64[rows*cols]           RMSprop square averages, row-major (if present)

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dobnet/errors.hpp"
#include "dobnet/ndiff/optim.hpp"
#include "dobnet/ndiff/param_set.hpp"

namespace dobnet::ndiff {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline constexpr char kCheckpointMagic[8] = {'D', 'O', 'B', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBlock {
  std::string name;
  Matrix value;
  Matrix square_avg;  // empty when no optimizer state was saved
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string architecture;
  std::vector<CheckpointBlock> blocks;

  bool has_optimizer_state() const { return !blocks.empty() && blocks.front().square_avg.size() > 0; }
};

inline Checkpoint make_checkpoint(const std::string& architecture, const ParamSet& params,
                                  const RmsProp* optimizer) {
  Checkpoint ck;
  ck.architecture = architecture;
  for (std::size_t i = 0; i < params.size(); ++i) {
    CheckpointBlock b{params.block(i).name, params.block(i).value, {}};
    if (optimizer) b.square_avg = optimizer->square_avg().at(i);
    ck.blocks.push_back(std::move(b));
  }
  return ck;
}

/// Copies checkpoint values (and optimizer state, when both sides have it)
/// into an already-built parameter set. Names and shapes must match exactly.
inline void restore_checkpoint(const Checkpoint& ck, ParamSet& params, RmsProp* optimizer) {
  if (ck.blocks.size() != params.size()) {
    throw LoadError("checkpoint has " + std::to_string(ck.blocks.size()) + " blocks, architecture expects " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& dst = params.block(i);
    const auto& src = ck.blocks[i];
    if (src.name != dst.name || src.value.rows() != dst.value.rows() || src.value.cols() != dst.value.cols()) {
      throw LoadError("checkpoint block '" + src.name + "' " + shape_str(src.value) +
                      " does not match architecture block '" + dst.name + "' " + shape_str(dst.value));
    }
    dst.value = src.value;
    if (optimizer && ck.has_optimizer_state()) optimizer->square_avg().at(i) = src.square_avg;
  }
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_row_major(std::ostream& os, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw LoadError(std::string("truncated checkpoint reading ") + what);
  return v;
}

inline std::string read_string(std::istream& is, const char* what) {
  const auto len = read_pod<std::uint32_t>(is, what);
  if (len > (1u << 20)) throw LoadError(std::string("implausible string length reading ") + what);
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), len)) throw LoadError(std::string("truncated checkpoint reading ") + what);
  return s;
}

inline Matrix read_row_major(std::istream& is, std::uint64_t rows, std::uint64_t cols) {
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = read_pod<double>(is, "payload");
  }
  return m;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32(os, ck.version);
  detail::write_string(os, ck.architecture);
  detail::write_u32(os, static_cast<std::uint32_t>(ck.blocks.size()));
  const bool with_opt = ck.has_optimizer_state();
  const std::uint8_t flag = with_opt ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&flag), 1);
  for (const auto& b : ck.blocks) {
    detail::write_string(os, b.name);
    detail::write_u64(os, static_cast<std::uint64_t>(b.value.rows()));
    detail::write_u64(os, static_cast<std::uint64_t>(b.value.cols()));
    detail::write_row_major(os, b.value);
    if (with_opt) detail::write_row_major(os, b.square_avg);
  }
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw LoadError("not a dobnet checkpoint (bad magic)");
  }
  Checkpoint ck;
  ck.version = detail::read_pod<std::uint32_t>(is, "version");
  if (ck.version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint format version " + std::to_string(ck.version));
  }
  ck.architecture = detail::read_string(is, "architecture");
  const auto n = detail::read_pod<std::uint32_t>(is, "block count");
  const bool with_opt = detail::read_pod<std::uint8_t>(is, "optimizer flag") != 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    CheckpointBlock b;
    b.name = detail::read_string(is, "block name");
    const auto rows = detail::read_pod<std::uint64_t>(is, "rows");
    const auto cols = detail::read_pod<std::uint64_t>(is, "cols");
    if (rows * cols > (1ull << 28)) throw LoadError("implausible block size for '" + b.name + "'");
    b.value = detail::read_row_major(is, rows, cols);
    if (with_opt) b.square_avg = detail::read_row_major(is, rows, cols);
    ck.blocks.push_back(std::move(b));
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, ck);
  if (!os) throw LoadError("write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

}  // namespace dobnet::ndiff
