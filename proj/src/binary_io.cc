// Copyright 2026 The Semstack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "semstack/binary_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "semstack/features.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

static_assert(std::endian::native == std::endian::little,
              "artifact encoders assume a little-endian host");

constexpr std::array<std::uint64_t, 256> make_crc64_table() {
  constexpr std::uint64_t kPoly = 0xC96C5795D7870F42ULL;
  std::array<std::uint64_t, 256> table{};
  for (std::uint64_t i = 0; i < 256; ++i) {
    std::uint64_t crc = i;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 1) ? (crc >> 1) ^ kPoly : crc >> 1;
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kCrc64Table = make_crc64_table();

}  // namespace

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  std::uint64_t crc = ~0ULL;
  for (std::uint8_t b : bytes) {
    crc = kCrc64Table[(crc ^ b) & 0xFF] ^ (crc >> 8);
  }
  return ~crc;
}

std::uint64_t crc64(std::string_view bytes) {
  return crc64(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string content_hash_hex(std::span<const std::uint8_t> bytes) {
  const std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(view)));
  return std::string(buf);
}

void ByteWriter::put_magic(std::string_view magic) {
  bytes_.insert(bytes_.end(), magic.begin(), magic.end());
}

void ByteWriter::put_u8(std::uint8_t v) { bytes_.push_back(v); }

void ByteWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::put_f32s(std::span<const float> values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  bytes_.insert(bytes_.end(), p, p + values.size_bytes());
}

void ByteWriter::put_u64s(std::span<const std::uint64_t> values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  bytes_.insert(bytes_.end(), p, p + values.size_bytes());
}

void ByteWriter::seal() { put_u64(crc64(bytes_)); }

void ByteReader::need(std::size_t n, const char* what) {
  if (remaining() < n) {
    throw Error(ErrorCode::kFormat,
                std::string("truncated input reading ") + what + " at offset " +
                    std::to_string(offset_) + " (need " + std::to_string(n) +
                    " bytes, have " + std::to_string(remaining()) + ")");
  }
}

std::string ByteReader::get_magic() {
  need(4, "magic");
  std::string magic(reinterpret_cast<const char*>(bytes_.data() + offset_), 4);
  offset_ += 4;
  return magic;
}

std::uint8_t ByteReader::get_u8() {
  need(1, "u8");
  return bytes_[offset_++];
}

std::uint32_t ByteReader::get_u32() {
  need(4, "u32");
  std::uint32_t v;
  std::memcpy(&v, bytes_.data() + offset_, 4);
  offset_ += 4;
  return v;
}

std::uint64_t ByteReader::get_u64() {
  need(8, "u64");
  std::uint64_t v;
  std::memcpy(&v, bytes_.data() + offset_, 8);
  offset_ += 8;
  return v;
}

float ByteReader::get_f32() { return std::bit_cast<float>(get_u32()); }

void ByteReader::get_f32s(std::span<float> out) {
  need(out.size_bytes(), "f32 array");
  std::memcpy(out.data(), bytes_.data() + offset_, out.size_bytes());
  offset_ += out.size_bytes();
}

void ByteReader::get_u64s(std::span<std::uint64_t> out) {
  need(out.size_bytes(), "u64 array");
  std::memcpy(out.data(), bytes_.data() + offset_, out.size_bytes());
  offset_ += out.size_bytes();
}

ByteReader open_sealed(std::span<const std::uint8_t> bytes,
                       std::string_view magic, std::uint32_t version,
                       std::string_view what) {
  const std::string label(what);
  ByteReader header(bytes);
  if (bytes.size() < 4 || header.get_magic() != magic) {
    throw Error(ErrorCode::kFormat, label + ": bad magic at offset 0, expected \"" +
                                        std::string(magic) + "\"");
  }
  if (bytes.size() < 8) {
    throw Error(ErrorCode::kFormat, label + ": truncated header at offset 4");
  }
  const std::uint32_t found = header.get_u32();
  if (found != version) {
    throw Error(ErrorCode::kUnsupportedVersion,
                label + ": unsupported version " + std::to_string(found) +
                    " at offset 4 (this build reads version " +
                    std::to_string(version) + ")");
  }
  if (bytes.size() < 16) {
    throw Error(ErrorCode::kChecksum,
                label + ": file of " + std::to_string(bytes.size()) +
                    " bytes is too short to hold a checksum trailer");
  }
  const std::size_t body = bytes.size() - 8;
  ByteReader trailer(bytes.subspan(body));
  const std::uint64_t stored = trailer.get_u64();
  const std::uint64_t computed = crc64(bytes.first(body));
  if (stored != computed) {
    throw Error(ErrorCode::kChecksum,
                label + ": checksum mismatch over bytes [0, " + std::to_string(body) +
                    "), trailer at offset " + std::to_string(body));
  }
  ByteReader reader(bytes.first(body));
  reader.get_magic();
  reader.get_u32();
  return reader;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()),
                              text.size()));
}

}  // namespace semstack
