// gvec/common.h

// Copyright 2026  gvec authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef GVEC_COMMON_H_
#define GVEC_COMMON_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gvec {

// All dense matrices are row-major: one row per embedding / graph node.
template <typename Real>
using MatrixRM =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixRMf = MatrixRM<float>;
using MatrixRMd = MatrixRM<double>;

// Error categories map onto CLI exit codes: config = 2, data = 3,
// numeric = 4.  Everything raised on purpose goes through one of these.
enum class ErrorCategory { kConfig, kData, kNumeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string &message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string &message)
      : Error(ErrorCategory::kConfig, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string &message)
      : Error(ErrorCategory::kData, message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string &message)
      : Error(ErrorCategory::kNumeric, message) {}
};

namespace io {

// Binary containers are little-endian regardless of host order.

template <typename T>
inline void WriteScalar(std::ostream &os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
inline T ReadScalar(std::istream &is, const std::string &what) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char *>(bytes), sizeof(T)))
    throw DataError("truncated input while reading " + what);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
inline void WriteArray(std::ostream &os, const T *data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char *>(data),
             static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < count; ++i) WriteScalar(os, data[i]);
  }
}

template <typename T>
inline void ReadArray(std::istream &is, T *data, std::size_t count,
                      const std::string &what) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char *>(data),
                 static_cast<std::streamsize>(count * sizeof(T))))
      throw DataError("truncated input while reading " + what);
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = ReadScalar<T>(is, what);
  }
}

void WriteMagic(std::ostream &os, const char magic[4]);
void ExpectMagic(std::istream &is, const char magic[4],
                 const std::string &what);

}  // namespace io
}  // namespace gvec

#endif  // GVEC_COMMON_H_
