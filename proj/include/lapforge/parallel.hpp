// Copyright 2026 The lapforge Authors.
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

#ifndef LAPFORGE_PARALLEL_HPP_
#define LAPFORGE_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace lapforge {

// LAPFORGE_THREADS if set to a positive integer, else the hardware
// concurrency (at least 1).
std::size_t default_thread_count();

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work is split in
// contiguous blocks; callers write results by index so output order never
// depends on scheduling. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace lapforge

#endif  // LAPFORGE_PARALLEL_HPP_
