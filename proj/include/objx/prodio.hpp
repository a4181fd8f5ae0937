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

#ifndef OBJX_PRODIO_HPP
#define OBJX_PRODIO_HPP

#include <string>

#include "objx/spatial.hpp"

namespace objx::io {

// Production directory schema: obj_<i>.wav + obj_<i>.csv per object,
// bed.wav (5.1). Audio is synthesized from / analyzed to the STFT domain
// on the way through.
void write_production(const std::string& dir,
                      const spatial::ObjectProduction& prod);
spatial::ObjectProduction read_production(const std::string& dir);

}  // namespace objx::io

#endif  // OBJX_PRODIO_HPP
