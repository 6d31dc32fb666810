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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "larag/matrix.hpp"

namespace larag {

// Binary tensor record:
//   magic "LARG" | u32 version | u32 dtype | u64 rank | u64 dims[rank]
//   | row-major little-endian payload (4-byte elements) | u32 CRC32 trailer
// The CRC covers every byte of the record before the trailer. dtype 1 is
// float32, dtype 2 is int32. Files may hold several records back to back.

inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::uint32_t kDtypeInt32 = 2;

struct TensorData {
  std::uint32_t dtype = kDtypeFloat32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::int32_t> i32;

  std::uint64_t element_count() const;
};

void write_tensor(std::ostream& out, const TensorData& tensor);
TensorData read_tensor(std::istream& in);

// Single-tensor file helpers.
void write_tensor_file(const std::filesystem::path& path, const TensorData& tensor);
TensorData read_tensor_file(const std::filesystem::path& path);

// Matrix convenience wrappers (rank-2 float32 records).
void write_matrix_file(const std::filesystem::path& path, const RowMatrix& m);
RowMatrix read_matrix_file(const std::filesystem::path& path);

RowMatrix tensor_to_matrix(const TensorData& tensor);
TensorData matrix_to_tensor(const RowMatrix& m);

}  // namespace larag
