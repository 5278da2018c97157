// Copyright 2026 The fusion-lab Authors
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

#ifndef FUSIONLAB__SRC__BINARY_IO_HPP_
#define FUSIONLAB__SRC__BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "fusionlab/error.hpp"

namespace fusionlab::detail
{

// Little-endian fixed-width encoding for the on-disk formats.
template <typename T>
void write_le(std::ostream & os, T value)
{
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
  }
  os.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
bool read_le(std::istream & is, T & value)
{
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char *>(bytes), sizeof(T))) {
    return false;
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
  }
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

template <typename T>
T get_le(const unsigned char * bytes)
{
  T value;
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char tmp[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      tmp[i] = bytes[sizeof(T) - 1 - i];
    }
    std::memcpy(&value, tmp, sizeof(T));
  } else {
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

}  // namespace fusionlab::detail

#endif  // FUSIONLAB__SRC__BINARY_IO_HPP_
