#include "clue/numerics/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "clue/error.hpp"

namespace clue::nn {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'L', 'U', 'E', 'N', 'N', '1', '\0'};
constexpr std::uint32_t kMaxDim = 1u << 24;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

void put_f64(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) fail(ErrorCode::parse_error, "truncated checkpoint header");
  return v;
}

void get_f64(std::istream& is, double* data, std::size_t n) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double))))
    fail(ErrorCode::parse_error, "truncated checkpoint payload at offset " + std::to_string(is.gcount()));
}

}  // namespace

void write_record(std::ostream& os, const LayerStack& layers) {
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    put_u32(os, static_cast<std::uint32_t>(l.in()));
    put_u32(os, static_cast<std::uint32_t>(l.out()));
  }
  for (const auto& l : layers) {
    put_f64(os, l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    put_f64(os, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

LayerStack read_record(std::istream& is) {
  std::array<char, 8> magic{};
  const auto offset = static_cast<long long>(is.tellg());
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    fail(ErrorCode::parse_error, "bad checkpoint magic at offset " + std::to_string(offset));
  const std::uint32_t count = get_u32(is);
  if (count == 0 || count > 1024) fail(ErrorCode::parse_error, "implausible layer count " + std::to_string(count));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto in = get_u32(is);
    const auto out = get_u32(is);
    if (in > kMaxDim || out > kMaxDim) fail(ErrorCode::parse_error, "implausible layer dimensions");
    dims.emplace_back(in, out);
  }
  LayerStack layers;
  for (const auto& [in, out] : dims) {
    Dense d{Matrix(out, in), Vector(out)};
    get_f64(is, d.weight.data(), static_cast<std::size_t>(d.weight.size()));
    get_f64(is, d.bias.data(), static_cast<std::size_t>(d.bias.size()));
    layers.push_back(std::move(d));
  }
  return layers;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<LayerStack>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::io_error, "cannot open '" + path.string() + "' for writing");
  for (const auto& r : records) write_record(os, r);
  if (!os) fail(ErrorCode::io_error, "failed writing '" + path.string() + "'");
}

std::vector<LayerStack> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::vector<LayerStack> records;
  while (is.peek() != std::char_traits<char>::eof()) records.push_back(read_record(is));
  if (records.empty()) fail(ErrorCode::parse_error, "empty checkpoint '" + path.string() + "'");
  return records;
}

LayerStack vector_record(const Vector& v) { return {Dense{Matrix(v.size(), 0), v}}; }

Vector vector_from_record(const LayerStack& record) {
  if (record.size() != 1 || record[0].in() != 0) fail(ErrorCode::parse_error, "record is not a bare vector");
  return record[0].bias;
}

}  // namespace clue::nn
