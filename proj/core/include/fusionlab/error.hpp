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

#ifndef FUSIONLAB__ERROR_HPP_
#define FUSIONLAB__ERROR_HPP_

#include <stdexcept>
#include <string>

namespace fusionlab
{

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not line up; the message names the offending dim.
class ShapeError : public Error
{
public:
  using Error::Error;
};

/// Malformed or truncated files (point clouds, checkpoints, JSON-lines).
class FormatError : public Error
{
public:
  using Error::Error;
};

/// Invalid configuration values. The CLI maps these to exit code 2.
class ConfigError : public Error
{
public:
  ConfigError(std::string field, const std::string & what)
  : Error(field + ": " + what), field_(std::move(field))
  {
  }

  const std::string & field() const noexcept { return field_; }

private:
  std::string field_;
};

}  // namespace fusionlab

#endif  // FUSIONLAB__ERROR_HPP_
