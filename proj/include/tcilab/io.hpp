#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tcilab/core.hpp"

namespace tcilab::io {

// CSV with header "t,x_1,...,x_d"; values printed with 17 significant digits.
void write_path_csv(std::ostream& out, const Path& path);
Path read_path_csv(std::istream& in);

// Binary container: "TCIP", u32 version, u64 point count, u32 dim, f64 times,
// f64 values (row-major), then zero or more tagged sections
// (4-byte tag, u64 count, f64 payload). Little-endian throughout.
constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  Path path;
  std::map<std::string, std::vector<double>> sections;
};

void write_container(std::ostream& out, const Container& c);
Container read_container(std::istream& in);

}  // namespace tcilab::io
