#include "cbsde/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cbsde/errors.hpp"

namespace cbsde {

namespace detail {

namespace {

template <class T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error(ErrorCode::Io, "truncated checkpoint");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void write_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t read_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

}  // namespace detail

namespace {
constexpr char kMagic[8] = {'C', 'B', 'S', 'D', 'E', 'M', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_mlp(std::ostream& out, const Mlp& net, std::uint64_t seed, std::uint64_t step) {
  const MlpSpec& spec = net.spec();
  out.write(kMagic, sizeof(kMagic));
  detail::write_u32(out, kVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(spec.input_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(spec.output_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(spec.hidden_widths.size()));
  for (int w : spec.hidden_widths) detail::write_u32(out, static_cast<std::uint32_t>(w));
  detail::write_u64(out, seed);
  detail::write_u64(out, step);
  detail::write_u64(out, net.parameter_count());
  for (double p : net.params()) detail::write_f64(out, p);
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint");
}

MlpCheckpoint read_mlp(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::Io, "not a network checkpoint");
  }
  if (detail::read_u32(in) != kVersion) {
    throw Error(ErrorCode::Io, "unsupported checkpoint version");
  }
  MlpSpec spec;
  spec.input_dim = static_cast<int>(detail::read_u32(in));
  spec.output_dim = static_cast<int>(detail::read_u32(in));
  const std::uint32_t hidden = detail::read_u32(in);
  if (hidden > 1024) throw Error(ErrorCode::Io, "implausible hidden layer count");
  for (std::uint32_t i = 0; i < hidden; ++i) {
    spec.hidden_widths.push_back(static_cast<int>(detail::read_u32(in)));
  }
  const std::uint64_t seed = detail::read_u64(in);
  const std::uint64_t step = detail::read_u64(in);
  const std::uint64_t count = detail::read_u64(in);
  Mlp net(spec);
  if (count != net.parameter_count()) {
    throw Error(ErrorCode::Io, "parameter count does not match the stored shape");
  }
  for (auto& p : net.params()) p = detail::read_f64(in);
  return MlpCheckpoint{std::move(net), seed, step};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cbsde
