#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pweaver {

/// Counts over a declared, ordered categorical support. Zero-count
/// categories stay part of the support; total() is always the sum of counts.
struct CategoricalDistribution {
  std::vector<std::string> categories;
  std::vector<std::int64_t> counts;

  static CategoricalDistribution with_support(std::vector<std::string> support) {
    CategoricalDistribution d;
    d.counts.assign(support.size(), 0);
    d.categories = std::move(support);
    return d;
  }

  std::int64_t total() const {
    std::int64_t sum = 0;
    for (auto c : counts) sum += c;
    return sum;
  }

  std::size_t index_of(std::string_view category) const {
    for (std::size_t i = 0; i < categories.size(); ++i) {
      if (categories[i] == category) return i;
    }
    throw std::out_of_range("category not in declared support: " + std::string(category));
  }

  void add(std::string_view category, std::int64_t n = 1) { counts[index_of(category)] += n; }

  double share(std::size_t i) const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(counts[i]) / static_cast<double>(t);
  }

  bool same_support(const CategoricalDistribution& other) const { return categories == other.categories; }
};

}  // namespace pweaver
