/*
   Copyright 2026 The fedsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

/// Failure categories shared by the C++ core and the C API.
enum class ErrorCode : int {
  kOk = 0,
  kParse = 1,
  kInvalidPartition = 2,
  kInvalidInput = 3,
  kShape = 4,
  kInvalidBatch = 5,
  kDegenerateSpectrum = 6,
  kInvalidSchedule = 7,
  kDivergence = 8,
  kConvergenceFailure = 9,
  kIo = 10,
  kConfig = 11,
  kInternal = 99,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by federation::run when the objective blows up.
class DivergenceError : public Error {
 public:
  DivergenceError(long step, double step_size, double loss);

  long step() const noexcept { return step_; }
  double step_size() const noexcept { return step_size_; }
  double loss() const noexcept { return loss_; }

 private:
  long step_;
  double step_size_;
  double loss_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fedsim
