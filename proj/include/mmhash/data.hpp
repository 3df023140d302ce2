#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmhash/labels.hpp"
#include "mmhash/loss.hpp"
#include "mmhash/numkernel.hpp"

namespace mmhash {

struct FeatureMatrix {
  Matrix values;
  std::optional<std::vector<LabelSet>> labels;

  std::size_t n_samples() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
  const std::vector<LabelSet>& require_labels() const;
};

// MMHF1 text: "MMHF1 <n_samples> <dim>" then one sample per line.
void write_features(std::ostream& os, const Matrix& values);
Matrix read_features(std::istream& is);
// Label sidecar: one line per sample, comma-separated non-negative integers.
void write_labels(std::ostream& os, const std::vector<LabelSet>& labels);
std::vector<LabelSet> read_labels(std::istream& is);

// The label sidecar of "<path>" lives at "<path>.labels".
std::string label_path(const std::string& feature_path);

void save_features(const std::string& path, const FeatureMatrix& features);
// Loads labels too when the sidecar exists.
FeatureMatrix load_features(const std::string& path);

enum class ClusterShape {
  Gaussian,  // isotropic blob around a random center
  Shells,    // concentric spheres of radius proportional to the class index
};

struct SyntheticSpec {
  std::size_t n_classes = 10;
  std::size_t samples_per_class = 100;
  std::size_t dim_x = 32;
  std::size_t dim_y = 64;
  double cluster_spread = 1.0;
  // Probability that a sample's Y-modality class equals its X-modality class.
  double cross_modal_consistency = 1.0;
  // Centers ~ N(0, (center_scale * cluster_spread)^2 I).
  double center_scale = 5.0;
  ClusterShape shape = ClusterShape::Gaussian;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  FeatureMatrix x;
  FeatureMatrix y;
};

// Row i of x and row i of y describe the same object. Samples are shuffled,
// so row order carries no class information.
SyntheticData synthesize(const SyntheticSpec& spec);

// Two disjoint draws around the same class centers.
struct SyntheticSplit {
  SyntheticData train;
  SyntheticData test;
};
SyntheticSplit synthesize_split(const SyntheticSpec& spec, std::size_t test_per_class);

struct PairSetSizes {
  std::size_t pos_x = 0;
  std::size_t neg_x = 0;
  std::size_t pos_y = 0;
  std::size_t neg_y = 0;
  std::size_t pos_xy = 0;
  std::size_t neg_xy = 0;
};

PairSets build_pairsets(const std::vector<LabelSet>& labels_x,
                        const std::vector<LabelSet>& labels_y, const PairSetSizes& sizes,
                        std::uint64_t seed);

// Keeps round(fraction * count) positives and negatives each, chosen by seed.
PairBatch subsample(const PairBatch& batch, double fraction, std::uint64_t seed);

// MMHP1 text: "MMHP1 <count>" then lines "<set> <a> <b> <+|-> <weight>"
// where set is one of xx, yy, xy.
void write_pairs(std::ostream& os, const PairSets& pairs);
PairSets read_pairs(std::istream& is);
void save_pairs(const std::string& path, const PairSets& pairs);
PairSets load_pairs(const std::string& path);

}  // namespace mmhash
