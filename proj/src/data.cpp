#include "mmhash/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "mmhash/error.hpp"
#include "mmhash/format.hpp"
#include "mmhash/rng.hpp"
#include "mmhash/trainer.hpp"

namespace mmhash {

const std::vector<LabelSet>& FeatureMatrix::require_labels() const {
  if (!labels) throw Error(ErrorCode::InvalidArgument, "feature matrix has no labels");
  return *labels;
}

// ---------------------------------------------------------------------------
// File formats

void write_features(std::ostream& os, const Matrix& values) {
  os << "MMHF1 " << values.rows() << ' ' << values.cols() << '\n';
  for (std::size_t r = 0; r < values.rows(); ++r) {
    const auto row = values.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? " " : "") << format_double(row[c]);
    os << '\n';
  }
}

Matrix read_features(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  auto fail = [&](const std::string& msg) -> void {
    throw Error(ErrorCode::Parse, "MMHF1 line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(is, line)) fail("empty input");
  std::size_t n = 0, dim = 0;
  {
    std::istringstream header(line);
    std::string magic, extra;
    if (!(header >> magic) || magic != "MMHF1") fail("expected magic 'MMHF1'");
    if (!(header >> n >> dim) || (header >> extra)) fail("malformed header");
  }
  std::vector<double> values;
  values.reserve(n * dim);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    std::size_t cols = 0;
    bool any = false;
    while (ls >> tok) {
      any = true;
      if (rows >= n) fail("more rows than the declared " + std::to_string(n));
      try {
        values.push_back(parse_double(tok));
      } catch (const Error& e) {
        fail(e.what());
      }
      ++cols;
    }
    if (!any) continue;
    if (cols != dim)
      fail("expected " + std::to_string(dim) + " values, found " + std::to_string(cols));
    ++rows;
  }
  if (rows != n)
    fail("header declares " + std::to_string(n) + " samples but found " + std::to_string(rows));
  return Matrix(n, dim, std::move(values));
}

void write_labels(std::ostream& os, const std::vector<LabelSet>& labels) {
  for (const LabelSet& s : labels) {
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << '\n';
  }
}

std::vector<LabelSet> read_labels(std::istream& is) {
  std::vector<LabelSet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    LabelSet s;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }),
                tok.end());
      if (tok.empty()) continue;
      int v = -1;
      try {
        std::size_t used = 0;
        v = std::stoi(tok, &used);
        if (used != tok.size()) v = -1;
      } catch (const std::exception&) {
        v = -1;
      }
      if (v < 0)
        throw Error(ErrorCode::Parse, "labels line " + std::to_string(lineno) +
                                          ": bad label '" + tok + "'");
      s.push_back(v);
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    out.push_back(std::move(s));
  }
  return out;
}

std::string label_path(const std::string& feature_path) { return feature_path + ".labels"; }

void save_features(const std::string& path, const FeatureMatrix& features) {
  {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
    write_features(os, features.values);
    if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
  }
  if (features.labels) {
    std::ofstream os(label_path(path));
    if (!os) throw Error(ErrorCode::Io, "cannot open " + label_path(path) + " for writing");
    write_labels(os, *features.labels);
  }
}

FeatureMatrix load_features(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  FeatureMatrix f;
  try {
    f.values = read_features(is);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
  const std::string lp = label_path(path);
  if (std::filesystem::exists(lp)) {
    std::ifstream ls(lp);
    f.labels = read_labels(ls);
    if (f.labels->size() != f.n_samples())
      throw Error(ErrorCode::Parse, lp + ": " + std::to_string(f.labels->size()) +
                                        " label lines for " + std::to_string(f.n_samples()) +
                                        " samples");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw Error(ErrorCode::InvalidArgument, "synthesize: need >= 2 classes");
  if (samples_per_class < 1)
    throw Error(ErrorCode::InvalidArgument, "synthesize: need >= 1 sample per class");
  if (dim_x < 2 || dim_y < 2)
    throw Error(ErrorCode::InvalidArgument, "synthesize: dimensions must be >= 2");
  if (!std::isfinite(cluster_spread) || cluster_spread < 0.0)
    throw Error(ErrorCode::InvalidArgument, "synthesize: spread must be >= 0");
  if (!(cross_modal_consistency >= 0.0 && cross_modal_consistency <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "synthesize: consistency must lie in [0, 1]");
  if (!std::isfinite(center_scale) || center_scale <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "synthesize: center_scale must be > 0");
}

namespace {

struct Centers {
  Matrix x;
  Matrix y;
};

Centers draw_centers(const SyntheticSpec& spec) {
  Centers c{Matrix(spec.n_classes, spec.dim_x), Matrix(spec.n_classes, spec.dim_y)};
  if (spec.shape == ClusterShape::Shells) return c;  // all shells share the origin
  Rng rng = make_rng(spec.seed, "centers");
  std::normal_distribution<double> gauss(0.0, spec.center_scale * spec.cluster_spread);
  for (double& v : c.x.span()) v = gauss(rng);
  for (double& v : c.y.span()) v = gauss(rng);
  return c;
}

void draw_sample(const SyntheticSpec& spec, std::span<const double> center, std::size_t cls,
                 Rng& rng, std::span<double> out) {
  std::normal_distribution<double> unit(0.0, 1.0);
  if (spec.shape == ClusterShape::Shells) {
    // Class c lives on the sphere of radius (c + 1) * center_scale.
    double nn = 0.0;
    for (double& v : out) {
      v = unit(rng);
      nn += v * v;
    }
    nn = std::sqrt(nn);
    const double radius = static_cast<double>(cls + 1) * spec.center_scale;
    for (double& v : out) v = nn > 0.0 ? v * radius / nn : 0.0;
  } else {
    std::copy(center.begin(), center.end(), out.begin());
  }
  for (double& v : out) v += spec.cluster_spread * unit(rng);
}

SyntheticData draw(const SyntheticSpec& spec, const Centers& centers, std::size_t per_class,
                   std::string_view stream) {
  const std::size_t n = spec.n_classes * per_class;
  Rng rng = make_rng(spec.seed, stream);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, spec.n_classes - 1);

  std::vector<std::size_t> class_x(n), class_y(n);
  for (std::size_t i = 0; i < n; ++i) {
    class_x[i] = i / per_class;
    class_y[i] = class_x[i];
    if (coin(rng) >= spec.cross_modal_consistency) class_y[i] = any_class(rng);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  SyntheticData out;
  out.x.values = Matrix(n, spec.dim_x);
  out.y.values = Matrix(n, spec.dim_y);
  out.x.labels.emplace(n);
  out.y.labels.emplace(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    draw_sample(spec, centers.x.row(class_x[i]), class_x[i], rng, out.x.values.row(r));
    draw_sample(spec, centers.y.row(class_y[i]), class_y[i], rng, out.y.values.row(r));
    (*out.x.labels)[r] = {static_cast<int>(class_x[i])};
    (*out.y.labels)[r] = {static_cast<int>(class_y[i])};
  }
  return out;
}

}  // namespace

SyntheticData synthesize(const SyntheticSpec& spec) {
  spec.validate();
  return draw(spec, draw_centers(spec), spec.samples_per_class, "samples");
}

SyntheticSplit synthesize_split(const SyntheticSpec& spec, std::size_t test_per_class) {
  spec.validate();
  if (test_per_class == 0)
    throw Error(ErrorCode::InvalidArgument, "synthesize_split: empty test split");
  const Centers centers = draw_centers(spec);
  return {draw(spec, centers, spec.samples_per_class, "samples"),
          draw(spec, centers, test_per_class, "test_samples")};
}

// ---------------------------------------------------------------------------
// Pair sets

PairSets build_pairsets(const std::vector<LabelSet>& labels_x,
                        const std::vector<LabelSet>& labels_y, const PairSetSizes& sizes,
                        std::uint64_t seed) {
  auto sample = [&](const std::vector<LabelSet>& a, const std::vector<LabelSet>& b,
                    std::size_t pos, std::size_t neg, bool same, std::string_view stream) {
    if (pos == 0 && neg == 0) return PairBatch{};
    return sample_pairs(a, b, pos, neg, derive_seed(seed, stream), same);
  };
  PairSets out;
  out.intra_x = sample(labels_x, labels_x, sizes.pos_x, sizes.neg_x, true, "pairs_x");
  out.intra_y = sample(labels_y, labels_y, sizes.pos_y, sizes.neg_y, true, "pairs_y");
  out.cross = sample(labels_x, labels_y, sizes.pos_xy, sizes.neg_xy, false, "pairs_xy");
  return out;
}

PairBatch subsample(const PairBatch& batch, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "subsample: fraction must lie in [0, 1]");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < batch.size(); ++i) (batch[i].positive() ? pos : neg).push_back(i);
  Rng rng(seed);
  std::vector<unsigned char> keep(batch.size(), 0);
  for (auto* group : {&pos, &neg}) {
    std::shuffle(group->begin(), group->end(), rng);
    const auto n = static_cast<std::size_t>(std::llround(fraction * group->size()));
    for (std::size_t k = 0; k < n; ++k) keep[(*group)[k]] = 1;
  }
  PairBatch out;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (keep[i]) out.push_back(batch[i]);
  return out;
}

void write_pairs(std::ostream& os, const PairSets& pairs) {
  os << "MMHP1 " << pairs.size() << '\n';
  const std::pair<const char*, const PairBatch*> sets[] = {
      {"xx", &pairs.intra_x}, {"yy", &pairs.intra_y}, {"xy", &pairs.cross}};
  for (const auto& [tag, batch] : sets)
    for (const Pair& p : *batch)
      os << tag << ' ' << p.a << ' ' << p.b << ' ' << (p.positive() ? '+' : '-') << ' '
         << format_double(p.weight) << '\n';
}

PairSets read_pairs(std::istream& is) {
  TokenReader in(is, "MMHP1");
  in.expect("MMHP1");
  const std::size_t n = in.next_count();
  PairSets out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string tag = in.next_token();
    PairBatch* target = tag == "xx"   ? &out.intra_x
                        : tag == "yy" ? &out.intra_y
                        : tag == "xy" ? &out.cross
                                      : nullptr;
    if (!target) in.fail("unknown pair set '" + tag + "'");
    Pair p;
    p.a = in.next_count();
    p.b = in.next_count();
    const std::string pol = in.next_token();
    if (pol != "+" && pol != "-") in.fail("polarity must be + or -, found '" + pol + "'");
    p.polarity = pol == "+" ? Polarity::Positive : Polarity::Negative;
    p.weight = in.next_double();
    if (p.weight < 0.0) in.fail("negative pair weight");
    target->push_back(p);
  }
  std::string extra;
  if (in.next(extra)) in.fail("trailing data after " + std::to_string(n) + " pairs");
  return out;
}

void save_pairs(const std::string& path, const PairSets& pairs) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_pairs(os, pairs);
}

PairSets load_pairs(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_pairs(is);
}

}  // namespace mmhash
