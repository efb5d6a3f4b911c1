#include "tcilab/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace tcilab::io {

static_assert(std::endian::native == std::endian::little,
              "container writer assumes a little-endian host");

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ShapeError("container: truncated input");
  return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& in, std::uint64_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ShapeError("container: truncated payload");
  return v;
}

}  // namespace

void write_path_csv(std::ostream& out, const Path& path) {
  out << "t";
  for (std::size_t k = 0; k < path.dim; ++k) out << ",x_" << (k + 1);
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < path.points(); ++i) {
    out << (*path.grid)[i];
    for (std::size_t k = 0; k < path.dim; ++k) out << ',' << path.at(i, k);
    out << '\n';
  }
}

Path read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ShapeError("csv: empty input");
  std::size_t dim = 0;
  for (char c : line)
    if (c == ',') ++dim;
  if (dim == 0) throw ShapeError("csv: no value columns");
  std::vector<double> times, values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (col == 0) times.push_back(v);
      else values.push_back(v);
      ++col;
    }
    if (col != dim + 1) throw ShapeError("csv: ragged row");
  }
  auto grid = std::make_shared<const TimeGrid>(TimeGrid::from_points(times));
  return Path(grid, dim, std::move(values));
}

void write_container(std::ostream& out, const Container& c) {
  out.write("TCIP", 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, c.path.points());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.path.dim));
  put_doubles(out, c.path.grid->points());
  put_doubles(out, c.path.values);
  for (const auto& [tag, payload] : c.sections) {
    if (tag.size() > 4 || tag.empty()) throw ShapeError("container: tag must be 1-4 chars");
    char buf[4] = {' ', ' ', ' ', ' '};
    std::memcpy(buf, tag.data(), tag.size());
    out.write(buf, 4);
    put<std::uint64_t>(out, payload.size());
    put_doubles(out, payload);
  }
}

Container read_container(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TCIP", 4) != 0) throw ShapeError("container: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kContainerVersion) throw ShapeError("container: unsupported version");
  const auto npts = get<std::uint64_t>(in);
  const auto dim = get<std::uint32_t>(in);
  auto times = get_doubles(in, npts);
  auto values = get_doubles(in, npts * dim);
  Container c;
  c.path = Path(std::make_shared<const TimeGrid>(TimeGrid::from_points(std::move(times))), dim,
                std::move(values));
  char tag[4];
  while (in.read(tag, 4)) {
    std::string name(tag, 4);
    while (!name.empty() && name.back() == ' ') name.pop_back();
    const auto n = get<std::uint64_t>(in);
    c.sections[name] = get_doubles(in, n);
  }
  return c;
}

}  // namespace tcilab::io
