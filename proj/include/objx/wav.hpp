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

#ifndef OBJX_WAV_HPP
#define OBJX_WAV_HPP

#include <string>

#include "objx/dsp.hpp"

namespace objx::io {

enum class WavFormat { kFloat32, kPcm24 };

// RIFF WAVE. Reads 16/24-bit PCM and 32-bit float; writes float32 by
// default. 5.1 files use the fixed channel order L, R, C, LFE, Ls, Rs.
dsp::Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const dsp::Waveform& w,
               WavFormat fmt = WavFormat::kFloat32);

}  // namespace objx::io

#endif  // OBJX_WAV_HPP
