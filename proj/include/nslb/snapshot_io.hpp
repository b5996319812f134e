#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "nslb/spectral_core.hpp"

namespace nslb {

// Header: "NSLB", u32 version, u32 n, u32 N, u32 components, f64 time, all
// little-endian; payload: component-major, row-major f64 node values.
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 28;

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Snapshot {
  double time = 0.0;
  PhysicalField field;
};

std::vector<std::uint8_t> encode_snapshot(const PhysicalField& field, double time);
Snapshot decode_snapshot(std::span<const std::uint8_t> bytes);

void write_snapshot(const std::filesystem::path& path, const PhysicalField& field, double time);
Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace nslb
