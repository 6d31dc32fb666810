// Copyright 2026-present the larag project
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

#include "larag/matrix.hpp"

#include <cmath>

namespace larag {

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) {
    double d = static_cast<double>(x);
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<float> l2_normalized(std::span<const float> v) {
  std::vector<float> out(v.begin(), v.end());
  double norm = l2_norm(v);
  if (norm == 0.0) return out;
  for (float& x : out) x = static_cast<float>(static_cast<double>(x) / norm);
  return out;
}

RowMatrix l2_normalized_rows(const RowMatrix& m) {
  RowMatrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto normalized = l2_normalized(m.row(r));
    std::copy(normalized.begin(), normalized.end(), out.row(r).begin());
  }
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return dot / (na * nb);
}

double dot_product(std::span<const double> a, std::span<const float> b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * static_cast<double>(b[i]);
  }
  return dot;
}

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace larag
