#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mmhash/model.hpp"
#include "mmhash/numkernel.hpp"

namespace mmhash {

inline constexpr std::size_t kMaxBits = 256;

// A code in {-1, +1}^m packed into 64-bit words: bit i of the code is bit
// (i % 64) of word i / 64, set for +1. Padding bits are always zero.
class HashCode {
 public:
  HashCode() = default;
  explicit HashCode(std::size_t bits);
  HashCode(std::size_t bits, std::vector<std::uint64_t> words);

  static HashCode from_signs(std::span<const int> signs);

  std::size_t bits() const noexcept { return bits_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool bit(std::size_t i) const;
  void set(std::size_t i, bool plus_one);
  int sign(std::size_t i) const { return bit(i) ? 1 : -1; }
  std::vector<int> signs() const;

  bool operator==(const HashCode&) const = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

inline std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

// bit i = (embedding[i] >= 0)
HashCode binarize(std::span<const double> embedding);

std::size_t hamming(const HashCode& a, const HashCode& b);

// Hashes every row of `data` with `net`.
std::vector<HashCode> hash_rows(const EmbeddingNet& net, const Matrix& data);

// MMHC1 binary container.
void write_codes(std::ostream& os, std::size_t bits, std::span<const HashCode> codes);
std::vector<HashCode> read_codes(std::istream& is);
void save_codes(const std::string& path, std::size_t bits, std::span<const HashCode> codes);
std::vector<HashCode> load_codes(const std::string& path);

}  // namespace mmhash
