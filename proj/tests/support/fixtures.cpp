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

#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace fusionlab::testing
{

config::Config small_config()
{
  config::Config cfg;
  cfg.model.grid.cell_x = 0.8;
  cfg.model.grid.cell_y = 0.8;
  cfg.model.bev_channels = 8;
  cfg.model.backbone.in_channels = 8;
  cfg.model.backbone.channels = {8, 8};
  cfg.model.backbone.strides = {1, 2};
  cfg.model.fad.hidden_dims = {8, 8};
  cfg.train.epochs = 1;
  cfg.train.batch_size = 2;
  return cfg;
}

TempDir::TempDir(const std::string & tag)
{
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("fusionlab_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir()
{
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fusionlab::testing
