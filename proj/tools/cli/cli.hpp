// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qixai::cli {

/// Runs the qixai command line. args excludes the program name. Returns the
/// process exit code: 0 success, 1 usage, 2 data or I/O, 3 non-convergence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qixai::cli
