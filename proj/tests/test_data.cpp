#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "mmhash/data.hpp"
#include "mmhash/error.hpp"
#include "mmhash/trainer.hpp"
#include "test_util.hpp"

using namespace mmhash;

namespace {

ErrorCode parse_error_code(const std::string& text, std::string* message = nullptr) {
  std::istringstream is(text);
  try {
    read_features(is);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return ErrorCode::Io;  // sentinel: nothing thrown
}

double nearest_center_accuracy(const FeatureMatrix& f, std::size_t n_classes) {
  const Matrix& v = f.values;
  Matrix centers(n_classes, v.cols());
  std::vector<double> count(n_classes);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const int c = f.require_labels()[r][0];
    axpy(1.0, v.row(r), centers.row(c));
    ++count[c];
  }
  for (std::size_t c = 0; c < n_classes; ++c)
    for (double& x : centers.row(c)) x /= count[c];
  std::size_t correct = 0;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < n_classes; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < v.cols(); ++k) d += std::pow(v(r, k) - centers(c, k), 2);
      if (d < best_d) best_d = d, best = c;
    }
    correct += static_cast<int>(best) == f.require_labels()[r][0];
  }
  return double(correct) / double(v.rows());
}

}  // namespace

TEST_CASE("MMHF1 round trip") {
  std::stringstream ss;
  write_features(ss, Matrix{{1.5, -2.0}});
  CHECK(ss.str() == "MMHF1 1 2\n1.5 -2\n");
  CHECK(read_features(ss) == Matrix{{1.5, -2.0}});

  std::mt19937_64 rng(1);
  const Matrix big = testutil::random_matrix(100, 32, rng, 3.0);
  std::stringstream bs;
  write_features(bs, big);
  CHECK(read_features(bs) == big);
}

TEST_CASE("MMHF1 errors name the line") {
  std::string msg;
  CHECK(parse_error_code("MMHF1 3 2\n1 2\n3 4\n", &msg) == ErrorCode::Parse);
  CHECK(msg.find("3 samples") != std::string::npos);
  CHECK(parse_error_code("MMHF1 2 2\n1 2\n3\n", &msg) == ErrorCode::Parse);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(parse_error_code("MMHF1 1 2\n1 nan\n", &msg) == ErrorCode::Parse);
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(parse_error_code("MMHF1 1 2\n1 inf\n") == ErrorCode::Parse);
  CHECK(parse_error_code("MMHF2 1 2\n1 2\n") == ErrorCode::Parse);
  CHECK(parse_error_code("MMHF1 1\n") == ErrorCode::Parse);
  CHECK(parse_error_code("MMHF1 1 2\n1 2\n3 4\n") == ErrorCode::Parse);
}

TEST_CASE("labels round trip and sidecar files") {
  std::stringstream ss;
  write_labels(ss, {{0}, {1, 3}, {}});
  CHECK(ss.str() == "0\n1,3\n\n");
  CHECK(read_labels(ss) == std::vector<LabelSet>{{0}, {1, 3}, {}});
  std::istringstream bad("1\n-2\n");
  CHECK_THROWS_AS(read_labels(bad), Error);

  const auto dir = std::filesystem::temp_directory_path() / "mmhash_test_data";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "f.txt").string();
  FeatureMatrix f{Matrix{{1, 2}, {3, 4}}, std::vector<LabelSet>{{0}, {2}}};
  save_features(path, f);
  CHECK(std::filesystem::exists(path + ".labels"));
  const FeatureMatrix back = load_features(path);
  CHECK(back.values == f.values);
  CHECK(back.labels == f.labels);
  CHECK_THROWS_AS(load_features((dir / "missing.txt").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthesize examples") {
  SyntheticSpec spec;
  spec.n_classes = 4;
  spec.samples_per_class = 25;
  spec.dim_x = 3;
  spec.dim_y = 5;
  const SyntheticData d = synthesize(spec);
  CHECK(d.x.n_samples() == 100);
  CHECK(d.y.dim() == 5);
  CHECK(d.x.labels == d.y.labels);  // consistency 1

  std::map<int, int> per_class;
  for (const LabelSet& s : *d.x.labels) ++per_class[s[0]];
  for (const auto& [c, n] : per_class) CHECK(n == 25);

  const SyntheticData again = synthesize(spec);
  CHECK(again.x.values == d.x.values);
  CHECK(again.y.values == d.y.values);

  spec.cluster_spread = 0.0;
  const SyntheticData flat = synthesize(spec);
  std::map<int, std::vector<double>> first;
  for (std::size_t r = 0; r < flat.x.n_samples(); ++r) {
    const auto row = flat.x.values.row(r);
    const int c = (*flat.x.labels)[r][0];
    if (!first.count(c)) first[c].assign(row.begin(), row.end());
    CHECK(std::equal(row.begin(), row.end(), first[c].begin()));
  }
}

TEST_CASE("noisy correspondence resamples Y classes") {
  SyntheticSpec spec;
  spec.cross_modal_consistency = 0.0;
  const SyntheticData d = synthesize(spec);
  std::size_t same = 0;
  for (std::size_t r = 0; r < d.x.n_samples(); ++r) same += (*d.x.labels)[r] == (*d.y.labels)[r];
  // Uniform resampling keeps about 1 in 10.
  CHECK(same > 50);
  CHECK(same < 160);
}

TEST_CASE("nearest-center classification on well separated clusters") {
  SyntheticSpec spec;
  spec.samples_per_class = 50;
  spec.seed = 4;
  const SyntheticData d = synthesize(spec);
  CHECK(nearest_center_accuracy(d.x, 10) >= 0.99);
  CHECK(nearest_center_accuracy(d.y, 10) >= 0.99);
}

TEST_CASE("split shares centers but not samples") {
  SyntheticSpec spec;
  spec.samples_per_class = 20;
  const SyntheticSplit s = synthesize_split(spec, 5);
  CHECK(s.train.x.n_samples() == 200);
  CHECK(s.test.x.n_samples() == 50);
  CHECK(s.train.x.values == synthesize(spec).x.values);
  CHECK_THROWS_AS(synthesize_split(spec, 0), Error);
}

TEST_CASE("shells put class c at radius (c + 1) * center_scale") {
  SyntheticSpec spec;
  spec.shape = ClusterShape::Shells;
  spec.n_classes = 3;
  spec.cluster_spread = 0.0;
  spec.center_scale = 2.0;
  const SyntheticData d = synthesize(spec);
  for (std::size_t r = 0; r < d.x.n_samples(); ++r) {
    const int c = (*d.x.labels)[r][0];
    CHECK(norm(d.x.values.row(r)) == doctest::Approx(2.0 * (c + 1)));
  }
}

TEST_CASE("SyntheticSpec validation") {
  SyntheticSpec s;
  s.n_classes = 1;
  CHECK_THROWS_AS(synthesize(s), Error);
  s = {};
  s.dim_x = 1;
  CHECK_THROWS_AS(synthesize(s), Error);
  s = {};
  s.cross_modal_consistency = 1.5;
  CHECK_THROWS_AS(synthesize(s), Error);
}

TEST_CASE("build_pairsets") {
  SyntheticSpec spec;
  spec.cross_modal_consistency = 0.7;
  const SyntheticData d = synthesize(spec);
  const PairSetSizes sizes{10000, 50000, 10000, 50000, 10000, 50000};
  const PairSets p = build_pairsets(*d.x.labels, *d.y.labels, sizes, 3);
  CHECK(p.intra_x.size() == 60000);
  CHECK(count_positive(p.cross) == 10000);
  auto verify = [](const PairBatch& b, const std::vector<LabelSet>& la, const std::vector<LabelSet>& lb) {
    for (const Pair& pr : b) REQUIRE(pr.positive() == labels_intersect(la[pr.a], lb[pr.b]));
  };
  verify(p.intra_x, *d.x.labels, *d.x.labels);
  verify(p.intra_y, *d.y.labels, *d.y.labels);
  verify(p.cross, *d.x.labels, *d.y.labels);
  CHECK(build_pairsets(*d.x.labels, *d.y.labels, sizes, 3) == p);
  CHECK_FALSE(build_pairsets(*d.x.labels, *d.y.labels, sizes, 4) == p);

  const PairBatch tenth = subsample(p.cross, 0.1, 9);
  CHECK(tenth.size() == 6000);
  CHECK(count_positive(tenth) == 1000);
  const PairBatch half = subsample(p.cross, 0.5, 9);
  CHECK(count_positive(half) == 5000);
  CHECK_THROWS_AS(subsample(p.cross, 1.5, 9), Error);

  const std::vector<LabelSet> one_class(10, LabelSet{0});
  CHECK_THROWS_AS(build_pairsets(one_class, one_class, {5, 5, 0, 0, 0, 0}, 1), Error);
}

TEST_CASE("MMHP1 round trip") {
  PairSets p;
  p.intra_x = {{0, 1, Polarity::Positive, 1.0}, {2, 3, Polarity::Negative, 0.25}};
  p.cross = {{4, 0, Polarity::Negative, 1.0 / 3.0}};
  std::stringstream ss;
  write_pairs(ss, p);
  CHECK(ss.str().rfind("MMHP1 3\nxx 0 1 + 1\n", 0) == 0);
  CHECK(read_pairs(ss) == p);
  std::istringstream bad("MMHP1 1\nzz 0 1 + 1\n");
  CHECK_THROWS_AS(read_pairs(bad), Error);
  std::istringstream short_file("MMHP1 2\nxx 0 1 + 1\n");
  CHECK_THROWS_AS(read_pairs(short_file), Error);
}
