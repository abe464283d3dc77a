/*
 * Copyright (c) 2026 The Forge Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>

namespace forge {

/// Worker count used by intra-op parallel loops. Defaults to FORGE_THREADS
/// from the environment, else 1.
int num_threads();
void set_num_threads(int n);

/// Runs fn(i) for i in [0, n). Iterations are statically partitioned into
/// contiguous blocks, so each index is always handled with the same code path
/// regardless of thread count; callers must write disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace forge
