#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmhash/hashing.hpp"
#include "mmhash/labels.hpp"

namespace mmhash {

// Immutable database of equal-length codes stored contiguously for scanning.
class HashIndex {
 public:
  HashIndex(std::span<const HashCode> codes, std::vector<std::uint64_t> ids,
            std::optional<std::vector<LabelSet>> labels = std::nullopt);
  // ids default to 0..n-1
  explicit HashIndex(std::span<const HashCode> codes,
                     std::optional<std::vector<LabelSet>> labels = std::nullopt);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t bits() const noexcept { return bits_; }
  std::uint64_t id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  const std::optional<std::vector<LabelSet>>& labels() const noexcept { return labels_; }
  std::span<const std::uint64_t> words(std::size_t i) const {
    return {words_.data() + i * words_per_code_, words_per_code_};
  }

  // Hamming distance from q to every entry, in index order.
  std::vector<std::size_t> distances(const HashCode& q) const;

 private:
  std::size_t bits_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::uint64_t> ids_;
  std::optional<std::vector<LabelSet>> labels_;
};

struct Hit {
  std::uint64_t id = 0;
  std::size_t distance = 0;
  std::size_t position = 0;  // row in the index

  bool operator==(const Hit&) const = default;
};

// Ordered by distance, ties by ascending id.
using RankedResult = std::vector<Hit>;

RankedResult query(const HashIndex& index, const HashCode& q, std::size_t k);

namespace reference {
// Full sort of every entry; the oracle for query().
RankedResult query(const HashIndex& index, const HashCode& q, std::size_t k);
}  // namespace reference

// Relevance flags are aligned with ranks: flags[r] is 1 when the (r+1)-th
// result is relevant.
double precision_at(std::span<const unsigned char> flags, std::size_t r);

// normalized: sum_r P(r) rel(r) / max(1, #relevant in the list).
// Otherwise the bare sum.
double average_precision(std::span<const unsigned char> flags, bool normalized = true);
double mean_average_precision(std::span<const std::vector<unsigned char>> per_query,
                              bool normalized = true);

struct EvalOptions {
  std::size_t top_r = 0;  // 0 ranks the whole database
  bool exclude_self = false;
  bool normalized_ap = true;
};

struct QueryScore {
  std::uint64_t query_id = 0;
  double ap = 0.0;
  double p_at_1 = 0.0;
  double p_at_5 = 0.0;
  double p_at_10 = 0.0;
};

struct DirectionReport {
  std::string name;
  double map = 0.0;
  double p_at_1 = 0.0;
  double p_at_5 = 0.0;
  double p_at_10 = 0.0;
  std::vector<QueryScore> queries;
};

// Ranks the database for every query; a result is relevant when its label
// set intersects the query's. The database must carry labels.
DirectionReport evaluate_direction(std::string name, std::span<const HashCode> queries,
                                   std::span<const LabelSet> query_labels,
                                   std::span<const std::uint64_t> query_ids,
                                   const HashIndex& db, const EvalOptions& options = {});

// query_id,ap,p_at_1,p_at_5,p_at_10
void write_report_csv(std::ostream& os, const DirectionReport& report);

}  // namespace mmhash
