// Copyright 2026 The hovsyn Authors
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

#include <stdexcept>
#include <string>

namespace hovsyn {

// Precondition violations throw std::invalid_argument. Domain failures that a
// caller is expected to handle (discard a site, resample, report) get their
// own types below.

struct MeshError : std::runtime_error {
  explicit MeshError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RegionError : std::runtime_error {
  explicit RegionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PairingError : std::runtime_error {
  explicit PairingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AlignmentError : std::runtime_error {
  explicit AlignmentError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SynthError : std::runtime_error {
  explicit SynthError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hovsyn
