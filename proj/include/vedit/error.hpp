// Copyright 2026 The vedit Authors.
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

namespace vedit {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (latent grids, token maps, masks, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition or configuration invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported on-disk data.
class FormatError : public Error {
 public:
  enum class Code {
    kIo,
    kBadMagic,
    kUnsupportedVersion,
    kUnsupportedDtype,
    kTruncated,
    kTrailingBytes,
    kDimOverflow,
    kNonFinite,
    kBadPgm,
    kBadManifest,
    kMissingRecord,
  };

  FormatError(Code code, const std::string& what) : Error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// Failure raised inside a denoising trajectory, tagged with where it happened.
class StepError : public Error {
 public:
  StepError(const std::string& phase, long frame, std::size_t step, const std::string& cause)
      : Error(describe(phase, frame, step, cause)), frame_(frame), step_(step) {}

  long frame() const noexcept { return frame_; }
  std::size_t step() const noexcept { return step_; }

 private:
  static std::string describe(const std::string& phase, long frame, std::size_t step,
                              const std::string& cause) {
    std::string s = phase;
    if (frame >= 0) s += " frame " + std::to_string(frame);
    s += " step " + std::to_string(step) + ": " + cause;
    return s;
  }

  long frame_;
  std::size_t step_;
};

}  // namespace vedit
