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

#include "larag/tensor_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>

#include "larag/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "LARG tensor files are little-endian; big-endian hosts are unsupported");

namespace larag {

namespace {

constexpr char kMagic[4] = {'L', 'A', 'R', 'G'};

class CrcWriter {
 public:
  explicit CrcWriter(std::ostream& out) : out_(out) {}

  void write(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(size));
  }

  template <typename T>
  void write_scalar(T value) {
    write(&value, sizeof(T));
  }

  std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

 private:
  std::ostream& out_;
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

class CrcReader {
 public:
  explicit CrcReader(std::istream& in) : in_(in) {}

  void read(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (!in_) {
      throw Error(ErrorCode::CorruptFile, "tensor record truncated");
    }
    crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(size));
  }

  template <typename T>
  T read_scalar() {
    T value;
    read(&value, sizeof(T));
    return value;
  }

  std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

 private:
  std::istream& in_;
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

}  // namespace

std::uint64_t TensorData::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const TensorData& tensor) {
  if (tensor.dtype != kDtypeFloat32 && tensor.dtype != kDtypeInt32) {
    throw Error(ErrorCode::InvalidParams, "unknown tensor dtype code");
  }
  std::uint64_t count = tensor.element_count();
  std::size_t stored =
      tensor.dtype == kDtypeFloat32 ? tensor.f32.size() : tensor.i32.size();
  if (stored != count) {
    throw Error(ErrorCode::InvalidParams, "tensor payload does not match dims");
  }

  CrcWriter writer(out);
  writer.write(kMagic, sizeof(kMagic));
  writer.write_scalar<std::uint32_t>(kTensorFormatVersion);
  writer.write_scalar<std::uint32_t>(tensor.dtype);
  writer.write_scalar<std::uint64_t>(tensor.dims.size());
  for (std::uint64_t d : tensor.dims) writer.write_scalar<std::uint64_t>(d);
  if (tensor.dtype == kDtypeFloat32) {
    writer.write(tensor.f32.data(), tensor.f32.size() * sizeof(float));
  } else {
    writer.write(tensor.i32.data(), tensor.i32.size() * sizeof(std::int32_t));
  }
  std::uint32_t crc = writer.crc();
  out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
  if (!out) {
    throw Error(ErrorCode::IoFailure, "tensor write failed");
  }
}

TensorData read_tensor(std::istream& in) {
  CrcReader reader(in);
  char magic[4];
  reader.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::CorruptFile, "bad tensor magic");
  }
  std::uint32_t version = reader.read_scalar<std::uint32_t>();
  if (version != kTensorFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "tensor format version " + std::to_string(version) +
                    ", expected " + std::to_string(kTensorFormatVersion));
  }
  TensorData tensor;
  tensor.dtype = reader.read_scalar<std::uint32_t>();
  if (tensor.dtype != kDtypeFloat32 && tensor.dtype != kDtypeInt32) {
    throw Error(ErrorCode::CorruptFile, "unknown tensor dtype code");
  }
  std::uint64_t rank = reader.read_scalar<std::uint64_t>();
  if (rank > 8) {
    throw Error(ErrorCode::CorruptFile, "implausible tensor rank");
  }
  tensor.dims.resize(rank);
  std::uint64_t count = 1;
  for (std::uint64_t& d : tensor.dims) {
    d = reader.read_scalar<std::uint64_t>();
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / d) {
      throw Error(ErrorCode::CorruptFile, "tensor dims overflow");
    }
    count *= d;
  }
  if (count > (1ull << 32)) {
    throw Error(ErrorCode::CorruptFile, "tensor payload implausibly large");
  }
  if (tensor.dtype == kDtypeFloat32) {
    tensor.f32.resize(count);
    reader.read(tensor.f32.data(), count * sizeof(float));
  } else {
    tensor.i32.resize(count);
    reader.read(tensor.i32.data(), count * sizeof(std::int32_t));
  }
  std::uint32_t computed = reader.crc();
  std::uint32_t stored;
  in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
  if (!in) {
    throw Error(ErrorCode::CorruptFile, "tensor record missing CRC trailer");
  }
  if (stored != computed) {
    throw Error(ErrorCode::CorruptFile, "tensor CRC mismatch");
  }
  return tensor;
}

void write_tensor_file(const std::filesystem::path& path, const TensorData& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  }
  write_tensor(out, tensor);
}

TensorData read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  return read_tensor(in);
}

void write_matrix_file(const std::filesystem::path& path, const RowMatrix& m) {
  write_tensor_file(path, matrix_to_tensor(m));
}

RowMatrix read_matrix_file(const std::filesystem::path& path) {
  return tensor_to_matrix(read_tensor_file(path));
}

RowMatrix tensor_to_matrix(const TensorData& tensor) {
  if (tensor.dtype != kDtypeFloat32 || tensor.dims.size() != 2) {
    throw Error(ErrorCode::CorruptFile, "expected rank-2 float32 tensor");
  }
  RowMatrix m;
  m.rows = tensor.dims[0];
  m.cols = tensor.dims[1];
  m.data = tensor.f32;
  return m;
}

TensorData matrix_to_tensor(const RowMatrix& m) {
  TensorData tensor;
  tensor.dtype = kDtypeFloat32;
  tensor.dims = {m.rows, m.cols};
  tensor.f32 = m.data;
  return tensor;
}

}  // namespace larag
