#pragma once

#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "qpww/error.hpp"

namespace qpww {

/// Tangential sites j_1..j_nu: distinct, nonzero, and with no pair k = -j.
/// The signed site list is also the velocity vector of a traveling torus.
class TangentialSet {
 public:
  TangentialSet() = default;
  explicit TangentialSet(std::vector<long> sites) : sites_(std::move(sites)) {
    for (std::size_t a = 0; a < sites_.size(); ++a) {
      if (sites_[a] == 0) throw InvalidArgument("TangentialSet: site 0 is not allowed");
      for (std::size_t b = 0; b < a; ++b) {
        if (sites_[a] == sites_[b]) throw InvalidArgument("TangentialSet: repeated site");
        if (sites_[a] == -sites_[b])
          throw InvalidArgument("TangentialSet: sites j and -j cannot both be tangential");
      }
    }
  }
  TangentialSet(std::initializer_list<long> s) : TangentialSet(std::vector<long>(s)) {}

  int nu() const { return static_cast<int>(sites_.size()); }
  std::span<const long> sites() const { return sites_; }
  long operator[](std::size_t i) const { return sites_[i]; }
  long max_abs() const {
    long m = 0;
    for (long j : sites_) m = std::max(m, std::labs(j));
    return m;
  }

  /// Linear frequencies sqrt|j_i|.
  std::vector<double> omega_bar() const {
    std::vector<double> w;
    for (long j : sites_) w.push_back(std::sqrt(static_cast<double>(std::labs(j))));
    return w;
  }
  std::vector<int> velocity() const { return {sites_.begin(), sites_.end()}; }

 private:
  std::vector<long> sites_;
};

}  // namespace qpww
