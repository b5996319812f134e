#include "nslb/snapshot_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace nslb {
namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'S', 'L', 'B'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t count, const char* what) {
    if (bytes_.size() - pos_ < count) {
      std::ostringstream msg;
      msg << "snapshot truncated at byte offset " << bytes_.size() << " while reading " << what << " (needs bytes "
          << pos_ << ".." << pos_ + count - 1 << ")";
      throw SnapshotError(msg.str());
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const PhysicalField& field, double time) {
  const TorusGrid& grid = field.grid();
  if (grid.dim() == 0 || field.components() <= 0) throw SnapshotError("encode_snapshot: empty field");
  if (!std::isfinite(time)) throw SnapshotError("encode_snapshot: time must be finite");
  std::vector<std::uint8_t> out;
  out.reserve(kSnapshotHeaderBytes + field.values().size() * 8);
  for (std::uint8_t b : kMagic) out.push_back(b);
  put_u32(out, kSnapshotVersion);
  put_u32(out, static_cast<std::uint32_t>(grid.dim()));
  put_u32(out, static_cast<std::uint32_t>(grid.modes()));
  put_u32(out, static_cast<std::uint32_t>(field.components()));
  put_f64(out, time);
  for (double v : field.values()) put_f64(out, v);
  return out;
}

Snapshot decode_snapshot(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    std::ostringstream msg;
    msg << "snapshot truncated at byte offset " << bytes.size() << " while reading magic";
    throw SnapshotError(msg.str());
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw SnapshotError("snapshot has bad magic (expected NSLB)");
  Reader in(bytes.subspan(4));
  std::uint32_t version = in.u32("version");
  if (version != kSnapshotVersion) {
    std::ostringstream msg;
    msg << "unsupported snapshot version " << version << " (reader understands " << kSnapshotVersion << ")";
    throw SnapshotError(msg.str());
  }
  std::uint32_t n = in.u32("dimension");
  std::uint32_t modes = in.u32("resolution");
  std::uint32_t comps = in.u32("component count");
  double time = in.f64("time");
  if (n != 2 && n != 3) throw SnapshotError("snapshot dimension must be 2 or 3, got " + std::to_string(n));
  if (comps == 0 || comps > 16) throw SnapshotError("snapshot component count out of range: " + std::to_string(comps));
  TorusGrid grid(static_cast<int>(n), static_cast<int>(modes));
  std::size_t payload = grid.size() * comps * 8;
  std::size_t expected = kSnapshotHeaderBytes + payload;
  if (bytes.size() != expected) {
    std::ostringstream msg;
    if (bytes.size() < expected)
      msg << "snapshot truncated at byte offset " << bytes.size() << "; header promises " << expected << " bytes";
    else
      msg << "snapshot has " << bytes.size() - expected << " trailing bytes after offset " << expected;
    throw SnapshotError(msg.str());
  }
  Snapshot snap;
  snap.time = time;
  snap.field = PhysicalField(grid, static_cast<int>(comps));
  for (double& v : snap.field.values()) v = in.f64("payload");
  return snap;
}

void write_snapshot(const std::filesystem::path& path, const PhysicalField& field, double time) {
  std::vector<std::uint8_t> bytes = encode_snapshot(field, time);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SnapshotError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SnapshotError("failed writing " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open snapshot " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_snapshot(bytes);
  } catch (const SnapshotError& e) {
    throw SnapshotError(path.string() + ": " + e.what());
  }
}

}  // namespace nslb
