#include "mmhash/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <ostream>

#include "mmhash/error.hpp"
#include "mmhash/format.hpp"

namespace mmhash {

HashIndex::HashIndex(std::span<const HashCode> codes, std::vector<std::uint64_t> ids,
                     std::optional<std::vector<LabelSet>> labels)
    : ids_(std::move(ids)), labels_(std::move(labels)) {
  if (codes.size() != ids_.size())
    throw Error(ErrorCode::DimensionMismatch, "HashIndex: codes and ids differ in length");
  if (labels_ && labels_->size() != codes.size())
    throw Error(ErrorCode::DimensionMismatch, "HashIndex: codes and labels differ in length");
  if (codes.empty()) return;
  bits_ = codes.front().bits();
  words_per_code_ = words_for(bits_);
  words_.reserve(codes.size() * words_per_code_);
  for (const HashCode& c : codes) {
    if (c.bits() != bits_)
      throw Error(ErrorCode::DimensionMismatch, "HashIndex: mixed code lengths");
    words_.insert(words_.end(), c.words().begin(), c.words().end());
  }
}

HashIndex::HashIndex(std::span<const HashCode> codes,
                     std::optional<std::vector<LabelSet>> labels)
    : HashIndex(codes,
                [&] {
                  std::vector<std::uint64_t> ids(codes.size());
                  std::iota(ids.begin(), ids.end(), 0);
                  return ids;
                }(),
                std::move(labels)) {}

std::vector<std::size_t> HashIndex::distances(const HashCode& q) const {
  if (q.bits() != bits_)
    throw Error(ErrorCode::DimensionMismatch,
                "query has " + std::to_string(q.bits()) + " bits, index has " +
                    std::to_string(bits_));
  std::vector<std::size_t> out(size());
  const auto qw = q.words();
  const auto n = static_cast<std::ptrdiff_t>(size());
  const std::size_t nw = words_per_code_;
  const std::uint64_t* base = words_.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::uint64_t* w = base + i * nw;
    std::size_t d = 0;
    for (std::size_t k = 0; k < nw; ++k) d += std::popcount(w[k] ^ qw[k]);
    out[i] = d;
  }
  return out;
}

namespace {

void check_query(const HashIndex& index, const HashCode& q, std::size_t k) {
  if (index.size() == 0) throw Error(ErrorCode::InvalidArgument, "query: empty index");
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "query: k must be >= 1");
  if (q.bits() != index.bits())
    throw Error(ErrorCode::DimensionMismatch, "query: code length differs from index");
}

bool rank_before(const Hit& a, const Hit& b) {
  return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
}

}  // namespace

RankedResult query(const HashIndex& index, const HashCode& q, std::size_t k) {
  check_query(index, q, k);
  const std::vector<std::size_t> dist = index.distances(q);
  RankedResult hits(index.size());
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i] = {index.id(i), dist[i], i};
  const std::size_t take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                    rank_before);
  hits.resize(take);
  return hits;
}

namespace reference {

RankedResult query(const HashIndex& index, const HashCode& q, std::size_t k) {
  check_query(index, q, k);
  RankedResult hits;
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::vector<std::uint64_t> w(index.words(i).begin(), index.words(i).end());
    hits.push_back({index.id(i), hamming(q, HashCode(index.bits(), std::move(w))), i});
  }
  std::sort(hits.begin(), hits.end(), rank_before);
  hits.resize(std::min(k, hits.size()));
  return hits;
}

}  // namespace reference

double precision_at(std::span<const unsigned char> flags, std::size_t r) {
  if (r == 0 || r > flags.size())
    throw Error(ErrorCode::InvalidArgument,
                "precision_at: r=" + std::to_string(r) + " outside [1, " +
                    std::to_string(flags.size()) + "]");
  const auto rel = std::count_if(flags.begin(), flags.begin() + static_cast<std::ptrdiff_t>(r),
                                 [](unsigned char f) { return f != 0; });
  return static_cast<double>(rel) / static_cast<double>(r);
}

double average_precision(std::span<const unsigned char> flags, bool normalized) {
  double sum = 0.0;
  std::size_t relevant = 0;
  for (std::size_t r = 0; r < flags.size(); ++r) {
    if (!flags[r]) continue;
    ++relevant;
    sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
  }
  if (!normalized) return sum;
  return sum / static_cast<double>(std::max<std::size_t>(1, relevant));
}

double mean_average_precision(std::span<const std::vector<unsigned char>> per_query,
                              bool normalized) {
  if (per_query.empty())
    throw Error(ErrorCode::InvalidArgument, "mean_average_precision: no queries");
  double sum = 0.0;
  for (const auto& flags : per_query) {
    if (flags.empty())
      throw Error(ErrorCode::InvalidArgument, "mean_average_precision: empty result list");
    sum += average_precision(flags, normalized);
  }
  return sum / static_cast<double>(per_query.size());
}

DirectionReport evaluate_direction(std::string name, std::span<const HashCode> queries,
                                   std::span<const LabelSet> query_labels,
                                   std::span<const std::uint64_t> query_ids,
                                   const HashIndex& db, const EvalOptions& options) {
  if (queries.size() != query_labels.size() || queries.size() != query_ids.size())
    throw Error(ErrorCode::DimensionMismatch, "evaluate: query codes, labels and ids differ");
  if (!db.labels())
    throw Error(ErrorCode::InvalidArgument, "evaluate: database has no labels");
  if (queries.empty()) throw Error(ErrorCode::InvalidArgument, "evaluate: no queries");
  const auto& db_labels = *db.labels();
  const std::size_t depth = options.top_r == 0 ? db.size() : std::min(options.top_r, db.size());

  DirectionReport report;
  report.name = std::move(name);
  report.queries.resize(queries.size());
  std::vector<std::vector<unsigned char>> flags(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const std::size_t k = options.exclude_self ? std::min(depth + 1, db.size()) : depth;
    RankedResult hits = query(db, queries[qi], k);
    if (options.exclude_self) {
      std::erase_if(hits, [&](const Hit& h) { return h.id == query_ids[qi]; });
      if (hits.size() > depth) hits.resize(depth);
    }
    auto& f = flags[qi];
    f.reserve(hits.size());
    for (const Hit& h : hits)
      f.push_back(labels_intersect(query_labels[qi], db_labels[h.position]) ? 1 : 0);
    QueryScore& s = report.queries[qi];
    s.query_id = query_ids[qi];
    if (f.empty()) continue;
    s.ap = average_precision(f, options.normalized_ap);
    s.p_at_1 = precision_at(f, std::min<std::size_t>(1, f.size()));
    s.p_at_5 = precision_at(f, std::min<std::size_t>(5, f.size()));
    s.p_at_10 = precision_at(f, std::min<std::size_t>(10, f.size()));
  }
  const double n = static_cast<double>(queries.size());
  for (const QueryScore& s : report.queries) {
    report.map += s.ap;
    report.p_at_1 += s.p_at_1;
    report.p_at_5 += s.p_at_5;
    report.p_at_10 += s.p_at_10;
  }
  report.map /= n;
  report.p_at_1 /= n;
  report.p_at_5 /= n;
  report.p_at_10 /= n;
  return report;
}

void write_report_csv(std::ostream& os, const DirectionReport& report) {
  os << "query_id,ap,p_at_1,p_at_5,p_at_10\n";
  for (const QueryScore& s : report.queries)
    os << s.query_id << ',' << format_double(s.ap) << ',' << format_double(s.p_at_1) << ','
       << format_double(s.p_at_5) << ',' << format_double(s.p_at_10) << '\n';
}

}  // namespace mmhash
