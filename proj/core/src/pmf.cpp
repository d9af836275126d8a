/*
 Copyright 2026 The riskmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "riskmpc/pmf.hpp"

#include <cmath>

namespace riskmpc {

Pmf::Pmf(Vector p, double sum_tol) : p_(std::move(p)) {
  if (p_.size() == 0) {
    throw std::invalid_argument("Pmf: empty probability vector");
  }
  for (Eigen::Index j = 0; j < p_.size(); ++j) {
    if (!(p_(j) > 0.0)) {
      throw std::invalid_argument("Pmf: entries must be strictly positive");
    }
  }
  if (std::abs(p_.sum() - 1.0) > sum_tol) {
    throw std::invalid_argument("Pmf: entries must sum to one");
  }
}

int sample_branch(const Pmf& p, double r) {
  if (!(r >= 0.0 && r < 1.0)) {
    throw std::invalid_argument("sample_branch: r must lie in [0, 1)");
  }
  double cum = 0.0;
  const int last = p.size() - 1;
  for (int j = 0; j < last; ++j) {
    cum += p(j);
    if (r < cum) return j;
  }
  return last;
}

}  // namespace riskmpc
