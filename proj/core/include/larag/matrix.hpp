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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace larag {

/// Dense row-major float32 matrix. Bulk embedding data is stored single
/// precision; similarity arithmetic promotes to double.
struct RowMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  RowMatrix() = default;
  RowMatrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data.data() + r * cols, cols);
  }
  std::span<float> row(std::size_t r) {
    return std::span<float>(data.data() + r * cols, cols);
  }

  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  bool empty() const { return rows == 0 || cols == 0; }

  bool operator==(const RowMatrix& other) const = default;
};

/// Euclidean norm, accumulated in double.
double l2_norm(std::span<const float> v);

/// Copy of `v` scaled to unit norm; a zero vector stays zero.
std::vector<float> l2_normalized(std::span<const float> v);

/// Matrix whose rows are the L2-normalized rows of `m`.
RowMatrix l2_normalized_rows(const RowMatrix& m);

/// Cosine similarity in double precision. Zero-norm operands compare as 0
/// against everything, so the function is total.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Dot product of a double-precision query against a float32 row.
double dot_product(std::span<const double> a, std::span<const float> b);

bool all_finite(std::span<const float> v);

}  // namespace larag
