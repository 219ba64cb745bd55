/*
 Copyright 2026 The rheo Authors
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

#include "rheo/error.hpp"

namespace rheo {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "ok";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::Configuration: return "configuration error";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::BadMagic: return "bad magic";
    case ErrorCode::SizeMismatch: return "size mismatch";
    case ErrorCode::DuplicateChannel: return "duplicate channel";
    case ErrorCode::Schema: return "schema mismatch";
    case ErrorCode::State: return "invalid state";
    case ErrorCode::Numerical: return "numerical failure";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown";
}

}  // namespace rheo
