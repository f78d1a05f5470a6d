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

#ifndef SEMSTACK_BINARY_IO_HPP_
#define SEMSTACK_BINARY_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semstack {

// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).
std::uint64_t crc64(std::span<const std::uint8_t> bytes);
std::uint64_t crc64(std::string_view bytes);
// FNV-1a 64 in hex. Sealed files end in their own CRC64, which drives the
// CRC64 of every whole sealed file to one constant, so content addressing
// uses a different hash.
std::string content_hash_hex(std::span<const std::uint8_t> bytes);

// Little-endian append-only encoder for the binary artifact formats.
class ByteWriter {
 public:
  void put_magic(std::string_view magic);
  void put_u8(std::uint8_t v);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f32(float v);
  void put_f32s(std::span<const float> values);
  void put_u64s(std::span<const std::uint64_t> values);
  // Appends the CRC64 of everything written so far.
  void seal();

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> release() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked little-endian decoder. Failures report the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string get_magic();
  std::uint8_t get_u8();
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  float get_f32();
  void get_f32s(std::span<float> out);
  void get_u64s(std::span<std::uint64_t> out);

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  void need(std::size_t n, const char* what);

  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

// Checks magic, version and CRC64 trailer of a sealed artifact, in that order,
// and returns a reader positioned just past the version field whose view ends
// before the trailer.
ByteReader open_sealed(std::span<const std::uint8_t> bytes,
                       std::string_view magic, std::uint32_t version,
                       std::string_view what);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
// Writes to a sibling temp file and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace semstack

#endif  // SEMSTACK_BINARY_IO_HPP_
