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

#include "rubricopt/optimizer/cluster.hpp"

#include <cmath>
#include <deque>

#include "rubricopt/error.hpp"

namespace rubricopt {

namespace {

void check_dimensions(std::span<const llm::EmbeddingVector> points) {
  for (const auto& p : points)
    if (p.dimension() != points.front().dimension())
      fail(ErrorCode::kInvalidArgument, "embeddings differ in dimension");
}

std::vector<double> norms(std::span<const llm::EmbeddingVector> points) {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double s = 0;
    for (double x : points[i].values) s += x * x;
    out[i] = std::sqrt(s);
  }
  return out;
}

inline double distance(const llm::EmbeddingVector& a, const llm::EmbeddingVector& b, double na, double nb) {
  if (na == 0 || nb == 0) return 1.0;
  double dot = 0;
  const std::size_t d = a.values.size();
  for (std::size_t k = 0; k < d; ++k) dot += a.values[k] * b.values[k];
  const double sim = dot / (na * nb);
  return 1.0 - sim;
}

}  // namespace

std::vector<double> cosine_distance_matrix_serial(std::span<const llm::EmbeddingVector> points) {
  if (points.empty()) return {};
  check_dimensions(points);
  const std::size_t n = points.size();
  const auto nrm = norms(points);
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(points[i], points[j], nrm[i], nrm[j]);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
  return out;
}

std::vector<double> cosine_distance_matrix(std::span<const llm::EmbeddingVector> points) {
  if (points.empty()) return {};
  check_dimensions(points);
  const std::size_t n = points.size();
  const auto nrm = norms(points);
  std::vector<double> out(n * n, 0.0);
  // Each row writes its own upper triangle and the mirrored column entries;
  // cells are disjoint across rows.
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(points[i], points[j], nrm[i], nrm[j]);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
  return out;
}

std::vector<int> dbscan(std::span<const double> distances, std::size_t n, double eps, std::size_t min_points) {
  if (distances.size() != n * n) fail(ErrorCode::kInvalidArgument, "distance matrix has the wrong size");
  if (min_points < 1) fail(ErrorCode::kInvalidArgument, "min_points must be positive");
  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);

  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (distances[i * n + j] <= eps) out.push_back(j);
    return out;
  };

  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    auto seeds = neighbours(i);
    if (seeds.size() < min_points) {
      label[i] = kNoise;
      continue;
    }
    label[i] = cluster;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) label[q] = cluster;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      auto more = neighbours(q);
      if (more.size() >= min_points) queue.insert(queue.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  return label;
}

}  // namespace rubricopt
