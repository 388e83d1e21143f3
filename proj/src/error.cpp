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

#include "fedsim/error.hpp"

#include <sstream>

namespace fedsim {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kInvalidPartition: return "invalid partition";
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kShape: return "shape mismatch";
    case ErrorCode::kInvalidBatch: return "invalid batch";
    case ErrorCode::kDegenerateSpectrum: return "degenerate spectrum";
    case ErrorCode::kInvalidSchedule: return "invalid schedule";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kConvergenceFailure: return "convergence failure";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

namespace {
std::string divergence_message(long step, double step_size, double loss) {
  std::ostringstream os;
  os << "divergence at t=" << step << " (step size " << step_size
     << ", loss " << loss << ")";
  return os.str();
}
}  // namespace

DivergenceError::DivergenceError(long step, double step_size, double loss)
    : Error(ErrorCode::kDivergence, divergence_message(step, step_size, loss)),
      step_(step),
      step_size_(step_size),
      loss_(loss) {}

}  // namespace fedsim
