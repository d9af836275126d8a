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

#pragma once

#include "riskmpc/common.hpp"

namespace riskmpc {

// Probability mass function over a finite branch alphabet {0, ..., L-1}.
// Entries are strictly positive and sum to one (checked at construction).
class Pmf {
 public:
  explicit Pmf(Vector p, double sum_tol = 1e-12);

  int size() const { return static_cast<int>(p_.size()); }
  double operator()(int j) const { return p_(j); }
  const Vector& probabilities() const { return p_; }

 private:
  Vector p_;
};

// Inverse-CDF sampling: returns the smallest branch j with r < p(0)+...+p(j).
// r must lie in [0, 1).
int sample_branch(const Pmf& p, double r);

}  // namespace riskmpc
