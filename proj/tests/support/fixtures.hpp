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

#ifndef FUSIONLAB_TESTS__FIXTURES_HPP_
#define FUSIONLAB_TESTS__FIXTURES_HPP_

#include <filesystem>
#include <string>

#include "fusionlab/config.hpp"

namespace fusionlab::testing
{

/// A narrow, coarse configuration (32 x 32 grid at 0.8 m, 8 channels, two
/// backbone stages) for tests that train or run the full pipeline quickly.
config::Config small_config();

/// A fresh, empty directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  explicit TempDir(const std::string & tag);
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir & operator=(const TempDir &) = delete;
  const std::filesystem::path & path() const { return path_; }
  std::filesystem::path operator/(const std::string & name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path & path);

}  // namespace fusionlab::testing

#endif  // FUSIONLAB_TESTS__FIXTURES_HPP_
