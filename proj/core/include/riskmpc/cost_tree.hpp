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

#include <span>
#include <vector>

#include "riskmpc/risk_envelope.hpp"

namespace riskmpc {

// Complete L-ary tree of per-history stage costs up to depth N. The node for
// history (j_0, ..., j_{h-1}) lives at level h; the root (empty history) is
// level 0. Storage is level order, so level h occupies indices
// [level_offset(h), level_offset(h+1)).
class CostSequenceTree {
 public:
  CostSequenceTree(int branching, int depth);

  int branching() const { return branching_; }
  int depth() const { return depth_; }
  Index node_count() const { return static_cast<Index>(costs_.size()); }
  Index level_offset(int level) const { return offsets_[level]; }
  Index level_size(int level) const {
    return offsets_[level + 1] - offsets_[level];
  }

  Index child(Index node, int j) const;
  Index node_index(std::span<const int> history) const;

  double cost(Index node) const { return costs_[node]; }
  double& cost(Index node) { return costs_[node]; }
  const std::vector<double>& costs() const { return costs_; }

 private:
  int branching_;
  int depth_;
  std::vector<Index> offsets_;  // depth + 2 entries; last = node_count
  std::vector<double> costs_;
};

// Nested (time-consistent) composition of the one-step envelope risk down the
// tree: each node's value is its own cost plus the envelope risk of its
// children's values; leaves contribute their cost. Returns the root value.
double compose_risk(const CostSequenceTree& tree, const RiskEnvelope& env);

}  // namespace riskmpc
