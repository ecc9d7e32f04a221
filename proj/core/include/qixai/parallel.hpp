// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace qixai {

/// Worker count: QIXAI_THREADS when set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
std::size_t thread_count();

/// Calls body(i) for i in [0, n) across up to thread_count() threads.
/// Each index is visited exactly once; callers write to disjoint slots and
/// reduce afterwards in index order. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qixai
