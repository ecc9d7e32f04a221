// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qixai/tensor.hpp"

namespace qixai {

/// Ordered name -> tensor map persisted in the QIXT binary format.
///
/// Layout (all integers little-endian):
///   "QIXT" | u32 version | u64 entry count |
///   per entry: u32 name length | name bytes | u32 rank |
///              rank x u64 extents | product(extents) x f64 data
class TensorArchive {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  using Entry = std::pair<std::string, Tensor>;

  /// Appends an entry. Throws DataError on an invalid or duplicate name.
  void add(std::string name, Tensor tensor);
  /// Replaces an existing entry in place or appends a new one.
  void set(std::string name, Tensor tensor);

  bool contains(std::string_view name) const noexcept;
  const Tensor* find(std::string_view name) const noexcept;
  /// Throws DataError("missing archive entry '<name>'") when absent.
  const Tensor& at(std::string_view name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const TensorArchive&, const TensorArchive&) = default;

 private:
  std::vector<Entry> entries_;
};

/// Nonempty printable ASCII without '/' or '\\'.
bool is_valid_entry_name(std::string_view name) noexcept;

std::string encode_archive(const TensorArchive& archive);
TensorArchive decode_archive(std::string_view bytes);

void write_archive(const TensorArchive& archive, const std::filesystem::path& path);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace qixai
