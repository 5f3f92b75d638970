// Copyright 2026 The Rubricopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <vector>

#include "rubricopt/llm/backend.hpp"

namespace rubricopt {

// Row-major n x n matrix of 1 - cosine similarity. The OpenMP version splits
// rows across threads; the serial version is the reference.
std::vector<double> cosine_distance_matrix(std::span<const llm::EmbeddingVector> points);
std::vector<double> cosine_distance_matrix_serial(std::span<const llm::EmbeddingVector> points);

// DBSCAN over a precomputed distance matrix. A point's neighbourhood
// includes itself, so min_points = 2 needs one other point within eps.
// Returns one label per point: a cluster index >= 0, or -1 for noise.
std::vector<int> dbscan(std::span<const double> distances, std::size_t n, double eps, std::size_t min_points);

}  // namespace rubricopt
