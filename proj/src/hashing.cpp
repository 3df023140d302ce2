#include "mmhash/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mmhash/error.hpp"

namespace mmhash {

namespace {

void check_bits(std::size_t bits) {
  if (bits == 0 || bits > kMaxBits)
    throw Error(ErrorCode::InvalidArgument,
                "code length " + std::to_string(bits) + " outside [1, " +
                    std::to_string(kMaxBits) + "]");
}

std::uint64_t padding_mask(std::size_t bits) {
  const std::size_t rem = bits % 64;
  return rem == 0 ? ~0ULL : (1ULL << rem) - 1;
}

}  // namespace

HashCode::HashCode(std::size_t bits) : bits_(bits), words_(words_for(bits), 0) {
  check_bits(bits);
}

HashCode::HashCode(std::size_t bits, std::vector<std::uint64_t> words)
    : bits_(bits), words_(std::move(words)) {
  check_bits(bits);
  if (words_.size() != words_for(bits))
    throw Error(ErrorCode::DimensionMismatch, "HashCode: wrong word count");
  if (words_.back() & ~padding_mask(bits))
    throw Error(ErrorCode::InvalidArgument, "HashCode: padding bits set");
}

HashCode HashCode::from_signs(std::span<const int> signs) {
  HashCode c(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) c.set(i, signs[i] > 0);
  return c;
}

bool HashCode::bit(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1ULL; }

void HashCode::set(std::size_t i, bool plus_one) {
  const std::uint64_t mask = 1ULL << (i % 64);
  if (plus_one)
    words_[i / 64] |= mask;
  else
    words_[i / 64] &= ~mask;
}

std::vector<int> HashCode::signs() const {
  std::vector<int> out(bits_);
  for (std::size_t i = 0; i < bits_; ++i) out[i] = sign(i);
  return out;
}

HashCode binarize(std::span<const double> embedding) {
  HashCode c(embedding.size());
  for (std::size_t i = 0; i < embedding.size(); ++i) c.set(i, embedding[i] >= 0.0);
  return c;
}

std::size_t hamming(const HashCode& a, const HashCode& b) {
  if (a.bits() != b.bits())
    throw Error(ErrorCode::DimensionMismatch,
                "hamming: code lengths " + std::to_string(a.bits()) + " and " +
                    std::to_string(b.bits()));
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t d = 0;
  for (std::size_t w = 0; w < wa.size(); ++w) d += std::popcount(wa[w] ^ wb[w]);
  return d;
}

std::vector<HashCode> hash_rows(const EmbeddingNet& net, const Matrix& data) {
  if (net.input_dim() != data.cols())
    throw Error(ErrorCode::DimensionMismatch,
                "hash_rows: net expects " + std::to_string(net.input_dim()) +
                    " features, data has " + std::to_string(data.cols()));
  std::vector<HashCode> codes(data.rows());
  const auto n = static_cast<std::ptrdiff_t>(data.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) codes[i] = binarize(forward(net, data.row(i)).span());
  return codes;
}

// ---------------------------------------------------------------------------
// MMHC1: "MMHC1", u32 m, u64 n, then n * ceil(m/64) u64 words, little endian.

namespace {

constexpr char kMagic[5] = {'M', 'M', 'H', 'C', '1'};

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw Error(ErrorCode::Parse, std::string("MMHC1: truncated ") + what);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_codes(std::ostream& os, std::size_t bits, std::span<const HashCode> codes) {
  check_bits(bits);
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(bits));
  put_le<std::uint64_t>(os, codes.size());
  for (const HashCode& c : codes) {
    if (c.bits() != bits)
      throw Error(ErrorCode::DimensionMismatch, "write_codes: mixed code lengths");
    for (std::uint64_t w : c.words()) put_le<std::uint64_t>(os, w);
  }
}

std::vector<HashCode> read_codes(std::istream& is) {
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw Error(ErrorCode::Parse, "MMHC1: bad magic");
  const auto bits = get_le<std::uint32_t>(is, "header");
  const auto n = get_le<std::uint64_t>(is, "header");
  check_bits(bits);
  std::vector<HashCode> codes;
  codes.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  const std::size_t nw = words_for(bits);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<std::uint64_t> words(nw);
    for (auto& w : words) w = get_le<std::uint64_t>(is, "code");
    codes.emplace_back(bits, std::move(words));
  }
  return codes;
}

void save_codes(const std::string& path, std::size_t bits, std::span<const HashCode> codes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_codes(os, bits, codes);
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::vector<HashCode> load_codes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_codes(is);
}

}  // namespace mmhash
