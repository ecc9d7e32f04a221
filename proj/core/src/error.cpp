// SPDX-License-Identifier: Apache-2.0
#include "qixai/error.hpp"

namespace qixai {

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage:
      return 1;
    case ErrorKind::data:
    case ErrorKind::io:
      return 2;
    case ErrorKind::numerical:
      return 3;
  }
  return 2;
}

}  // namespace qixai
