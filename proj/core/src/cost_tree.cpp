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

#include "riskmpc/cost_tree.hpp"

namespace riskmpc {

namespace {
constexpr Index kMaxNodes = Index{1} << 31;
}

CostSequenceTree::CostSequenceTree(int branching, int depth)
    : branching_(branching), depth_(depth) {
  if (branching < 1) {
    throw std::invalid_argument("CostSequenceTree: branching must be >= 1");
  }
  if (depth < 0) {
    throw std::invalid_argument("CostSequenceTree: depth must be >= 0");
  }
  offsets_.resize(depth + 2);
  offsets_[0] = 0;
  Index level = 1;
  for (int h = 0; h <= depth; ++h) {
    offsets_[h + 1] = offsets_[h] + level;
    if (offsets_[h + 1] > kMaxNodes) {
      throw std::length_error("CostSequenceTree: node count overflow");
    }
    level *= branching;
  }
  costs_.assign(static_cast<std::size_t>(offsets_[depth + 1]), 0.0);
}

Index CostSequenceTree::child(Index node, int j) const {
  if (node < 0 || node >= node_count() || j < 0 || j >= branching_) {
    throw std::out_of_range("CostSequenceTree: child index out of range");
  }
  if (node >= offsets_[depth_]) {
    throw std::out_of_range("CostSequenceTree: leaves have no children");
  }
  // Level-order: the children of the i-th node of level h are the
  // (i*L + j)-th nodes of level h+1.
  int level = 0;
  while (node >= offsets_[level + 1]) ++level;
  const Index pos = node - offsets_[level];
  return offsets_[level + 1] + pos * branching_ + j;
}

Index CostSequenceTree::node_index(std::span<const int> history) const {
  const int h = static_cast<int>(history.size());
  if (h > depth_) {
    throw std::invalid_argument("CostSequenceTree: history too long");
  }
  Index pos = 0;
  for (int i = 0; i < h; ++i) {
    const int j = history[i];
    if (j < 0 || j >= branching_) {
      throw std::invalid_argument("CostSequenceTree: branch out of range");
    }
    pos = pos * branching_ + j;
  }
  return offsets_[h] + pos;
}

double compose_risk(const CostSequenceTree& tree, const RiskEnvelope& env) {
  const int L = tree.branching();
  if (env.dim() != L) {
    throw std::invalid_argument("compose_risk: envelope dimension mismatch");
  }
  const auto& verts = env.vertices();
  const int N = tree.depth();

  // Backward recursion over levels; values of level h+1 collapse into level h.
  std::vector<double> value(tree.costs());
  Vector child_values(L);
  for (int h = N - 1; h >= 0; --h) {
    const Index begin = tree.level_offset(h);
    const Index count = tree.level_size(h);
    const Index child_begin = tree.level_offset(h + 1);
    for (Index i = 0; i < count; ++i) {
      for (int j = 0; j < L; ++j) {
        child_values(j) = value[child_begin + i * L + j];
      }
      value[begin + i] += evaluate_risk(verts, child_values);
    }
  }
  return value[0];
}

}  // namespace riskmpc
