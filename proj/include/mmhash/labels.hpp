#pragma once

#include <algorithm>
#include <vector>

namespace mmhash {

// Class memberships of one sample; multi-label data carries several.
using LabelSet = std::vector<int>;

// Two samples are similar when they share at least one class.
inline bool labels_intersect(const LabelSet& a, const LabelSet& b) {
  return std::any_of(a.begin(), a.end(), [&](int l) {
    return std::find(b.begin(), b.end(), l) != b.end();
  });
}

}  // namespace mmhash
