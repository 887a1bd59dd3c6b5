#include "mfoc/field_io.hpp"

#include <cstring>
#include <fstream>

namespace mfoc {

namespace {
constexpr char kMagic[4] = {'M', 'F', 'O', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void write_field_binary(const std::string& path, const ScalarField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_field_binary: cannot open " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.d));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.n));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(f.values.size()));
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_field_binary: write failed for " + path);
}

ScalarField read_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_field_binary: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("read_field_binary: bad magic in " + path);
  auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("read_field_binary: unsupported version " +
                             std::to_string(version));
  auto d = get<std::uint32_t>(in);
  auto n = get<std::uint32_t>(in);
  auto count = get<std::uint64_t>(in);
  TorusGrid grid(static_cast<int>(d), static_cast<int>(n));
  if (count != grid.size())
    throw std::runtime_error("read_field_binary: count does not match grid shape");
  ScalarField f(grid);
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("read_field_binary: truncated file " + path);
  return f;
}

void write_field_csv(const std::string& path, const ScalarField& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_field_csv: cannot open " + path);
  const TorusGrid& g = f.grid;
  for (int a = 0; a < g.d; ++a) out << "i" << a << ",";
  out << "value\n";
  out.precision(17);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    auto idx = g.unravel(i);
    for (int a = 0; a < g.d; ++a) out << idx[a] << ",";
    out << f.values[i] << "\n";
  }
}

}  // namespace mfoc
