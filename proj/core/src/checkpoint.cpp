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

#include "fusionlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "fusionlab/error.hpp"

namespace fusionlab::checkpoint
{

using detail::read_le;
using detail::write_le;

void save(const std::filesystem::path & path, const nn::StateList & state)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw Error("cannot open checkpoint for writing: " + path.string());
  }
  os.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(os, kVersion);
  for (const auto & e : state) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const auto & shape = e.tensor.shape();
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) {
      write_le<std::uint64_t>(os, d);
    }
    for (double v : e.tensor.data()) {
      write_le<double>(os, v);
    }
  }
  if (!os) {
    throw Error("failed writing checkpoint: " + path.string());
  }
}

nn::StateList read(const std::filesystem::path & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error("cannot open checkpoint: " + path.string());
  }
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  std::uint32_t version = 0;
  if (!read_le(is, version) || version != kVersion) {
    throw FormatError(
      path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  nn::StateList out;
  while (true) {
    const auto offset = static_cast<long long>(is.tellg());
    std::uint32_t name_len = 0;
    if (!read_le(is, name_len)) {
      break;  // clean end of file
    }
    auto fail = [&](const std::string & what) {
      throw FormatError(
        path.string() + ": malformed record at byte " + std::to_string(offset) + ": " + what);
    };
    if (name_len > 4096) {
      fail("name length " + std::to_string(name_len));
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      fail("truncated name");
    }
    std::uint32_t rank = 0;
    if (!read_le(is, rank) || rank > 8) {
      fail("bad rank");
    }
    tensor::Shape shape(rank);
    for (auto & d : shape) {
      std::uint64_t v = 0;
      if (!read_le(is, v)) {
        fail("truncated dims");
      }
      d = static_cast<std::size_t>(v);
    }
    std::vector<double> data(tensor::numel_of(shape));
    for (auto & v : data) {
      if (!read_le(is, v)) {
        fail("truncated payload for '" + name + "'");
      }
    }
    out.push_back({std::move(name), tensor::Tensor::from(std::move(shape), std::move(data)), false});
  }
  return out;
}

void load_into(const std::filesystem::path & path, const nn::StateList & target)
{
  nn::load_state(target, read(path));
}

}  // namespace fusionlab::checkpoint
