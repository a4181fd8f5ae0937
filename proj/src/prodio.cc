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

#include "objx/prodio.hpp"

#include <filesystem>

#include "objx/datagen.hpp"
#include "objx/errors.hpp"
#include "objx/wav.hpp"

namespace objx::io {

namespace fs = std::filesystem;

void write_production(const std::string& dir,
                      const spatial::ObjectProduction& prod) {
  fs::create_directories(dir);
  for (size_t o = 0; o < prod.objects.size(); ++o) {
    const auto& obj = prod.objects[o];
    write_wav((fs::path(dir) / ("obj_" + std::to_string(o) + ".wav")).string(),
              dsp::istft(obj.stft));
    datagen::write_trajectory_csv(
        (fs::path(dir) / ("obj_" + std::to_string(o) + ".csv")).string(),
        obj.traj);
  }
  write_wav((fs::path(dir) / "bed.wav").string(), dsp::istft(prod.bed));
}

spatial::ObjectProduction read_production(const std::string& dir) {
  spatial::ObjectProduction prod;
  for (int o = 0;; ++o) {
    const fs::path wav = fs::path(dir) / ("obj_" + std::to_string(o) + ".wav");
    if (!fs::exists(wav)) break;
    spatial::ObjectTrack obj;
    dsp::Waveform w = read_wav(wav.string());
    if (w.channels() != 1) throw DataError("object wav must be mono: " + wav.string());
    obj.stft = dsp::stft_mono(w.samples[0]);
    obj.traj = datagen::read_trajectory_csv(
        (fs::path(dir) / ("obj_" + std::to_string(o) + ".csv")).string());
    if (obj.traj.frames() != obj.stft.frames())
      throw DataError("trajectory/track frame mismatch in " + dir);
    prod.objects.push_back(std::move(obj));
  }
  const fs::path bed = fs::path(dir) / "bed.wav";
  if (!fs::exists(bed)) throw DataError("production missing bed.wav: " + dir);
  dsp::Waveform bw = read_wav(bed.string());
  if (bw.channels() != 6) throw DataError("bed.wav must have 6 channels: " + dir);
  prod.bed = dsp::stft(bw);
  if (prod.objects.empty()) throw DataError("production has no objects: " + dir);
  return prod;
}

}  // namespace objx::io
