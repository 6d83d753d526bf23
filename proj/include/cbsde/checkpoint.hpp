#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "cbsde/mlp.hpp"

namespace cbsde {

/// Network checkpoint record (all integers little-endian):
///
///   offset  size  field
///   0       8     magic "CBSDEMLP"
///   8       4     u32 format version (1)
///   12      4     u32 input_dim
///   16      4     u32 output_dim
///   20      4     u32 hidden layer count H
///   24      4H    u32 hidden widths
///   24+4H   8     u64 initialization seed
///   32+4H   8     u64 optimizer step counter
///   40+4H   8     u64 parameter count P
///   48+4H   8P    f64 parameters in the Mlp flat layout
struct MlpCheckpoint {
  Mlp net;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

void write_mlp(std::ostream& out, const Mlp& net, std::uint64_t seed, std::uint64_t step);
MlpCheckpoint read_mlp(std::istream& in);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

namespace detail {
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
}  // namespace detail

}  // namespace cbsde
