// SPDX-License-Identifier: Apache-2.0
#include "qixai/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "qixai/error.hpp"

namespace qixai {

namespace {

constexpr char kMagic[4] = {'Q', 'I', 'X', 'T'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(value >> (8 * i))));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    field_ = pos_;
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    field_ = pos_;
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  // Reports the start of the field read last.
  [[noreturn]] void fail(const std::string& message) const {
    throw DataError("corrupt archive at offset " + std::to_string(field_) + ": " + message);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DataError("truncated archive at offset " + std::to_string(pos_) + ": expected " +
                      std::to_string(n) + " bytes for " + what + ", " +
                      std::to_string(remaining()) + " available");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::size_t field_ = 0;
};

}  // namespace

bool is_valid_entry_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return c >= 0x20 && c <= 0x7e && c != '/' && c != '\\';
  });
}

void TensorArchive::add(std::string name, Tensor tensor) {
  if (!is_valid_entry_name(name)) {
    throw DataError("invalid archive entry name '" + name +
                    "' (need nonempty printable ASCII without path separators)");
  }
  if (contains(name)) throw DataError("duplicate archive entry '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

void TensorArchive::set(std::string name, Tensor tensor) {
  for (auto& [existing, value] : entries_) {
    if (existing == name) {
      value = std::move(tensor);
      return;
    }
  }
  add(std::move(name), std::move(tensor));
}

bool TensorArchive::contains(std::string_view name) const noexcept {
  return find(name) != nullptr;
}

const Tensor* TensorArchive::find(std::string_view name) const noexcept {
  for (const auto& [existing, value] : entries_) {
    if (existing == name) return &value;
  }
  return nullptr;
}

const Tensor& TensorArchive::at(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  throw DataError("missing archive entry '" + std::string(name) + "'");
}

std::string encode_archive(const TensorArchive& archive) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, TensorArchive::kFormatVersion);
  put_le<std::uint64_t>(out, archive.size());
  for (const auto& [name, tensor] : archive.entries()) {
    if (std::size_t bad = tensor.first_non_finite(); bad != tensor.size()) {
      throw DataError("archive entry '" + name + "' has a non-finite value at flat index " +
                      std::to_string(bad));
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t e : tensor.shape()) put_le<std::uint64_t>(out, e);
    for (double v : tensor.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

TensorArchive decode_archive(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) {
    throw DataError("corrupt archive at offset 0: bad magic (expected \"QIXT\")");
  }
  const auto version = in.get<std::uint32_t>("format version");
  if (version != TensorArchive::kFormatVersion) {
    in.fail("unsupported format version " + std::to_string(version));
  }
  const auto count = in.get<std::uint64_t>("entry count");

  TensorArchive archive;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = in.get<std::uint32_t>("entry name length");
    std::string name(in.take(name_len, "entry name"));
    if (!is_valid_entry_name(name)) in.fail("invalid entry name '" + name + "'");
    if (archive.contains(name)) in.fail("duplicate entry name '" + name + "'");

    const auto rank = in.get<std::uint32_t>("tensor rank");
    if (rank == 0) in.fail("entry '" + name + "' has rank 0");
    Shape shape(rank);
    std::size_t count_values = 1;
    for (auto& extent : shape) {
      const auto e64 = in.get<std::uint64_t>("tensor extent");
      if (e64 == 0) in.fail("entry '" + name + "' has a zero extent");
      if (e64 > std::numeric_limits<std::size_t>::max() / 8 / count_values) {
        in.fail("entry '" + name + "' has an implausible shape");
      }
      extent = static_cast<std::size_t>(e64);
      count_values *= extent;
    }
    if (in.remaining() / 8 < count_values) {
      throw DataError("truncated archive at offset " + std::to_string(in.offset()) +
                      ": entry '" + name + "' declares " + std::to_string(count_values) +
                      " values but only " + std::to_string(in.remaining() / 8) +
                      " remain");
    }
    std::vector<double> data(count_values);
    for (auto& v : data) v = std::bit_cast<double>(in.get<std::uint64_t>("tensor data"));
    archive.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (in.remaining() != 0) {
    throw DataError("corrupt archive at offset " + std::to_string(in.offset()) + ": " +
                    std::to_string(in.remaining()) + " trailing bytes after the last entry");
  }
  return archive;
}

void write_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  const std::string bytes = encode_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open archive '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  try {
    return decode_archive(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace qixai
