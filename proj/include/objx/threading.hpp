// Copyright 2026 the objx authors
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

#ifndef OBJX_THREADING_HPP
#define OBJX_THREADING_HPP

namespace objx::threads {

// Process-wide worker count for the OpenMP kernels. 1 = serial.
// Kernels assign each output element to exactly one thread and keep inner
// accumulation order fixed, so results are bit-identical at any count.
void set(int n);
int get();

}  // namespace objx::threads

#endif  // OBJX_THREADING_HPP
