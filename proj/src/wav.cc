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

#include "objx/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "objx/errors.hpp"

namespace objx::io {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
void wr_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

dsp::Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data());
  const size_t n = bytes.size();
  if (n < 44 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF WAVE file: " + path);

  uint16_t fmt_code = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= n) {
    const uint32_t chunk_len = rd_u32(p + off + 4);
    const uint8_t* body = p + off + 8;
    if (off + 8 + chunk_len > n) throw DataError("truncated wav chunk: " + path);
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw DataError("bad fmt chunk: " + path);
      fmt_code = rd_u16(body);
      channels = rd_u16(body + 2);
      rate = rd_u32(body + 4);
      bits = rd_u16(body + 14);
      if (fmt_code == 0xFFFE && chunk_len >= 40)
        fmt_code = rd_u16(body + 24);  // extensible: subformat GUID head
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    off += 8 + chunk_len + (chunk_len & 1);
  }
  if (!data || channels == 0) throw DataError("wav missing data/fmt: " + path);

  const int bytes_per = bits / 8;
  if (!((fmt_code == 1 && (bits == 16 || bits == 24)) ||
        (fmt_code == 3 && bits == 32)))
    throw DataError("unsupported wav format (want 16/24-bit PCM or float32): " + path);

  const int64_t frames = data_len / (channels * bytes_per);
  dsp::Waveform w = dsp::Waveform::zeros(channels, frames);
  w.sample_rate = static_cast<int>(rate);
  for (int64_t i = 0; i < frames; ++i)
    for (int c = 0; c < channels; ++c) {
      const uint8_t* sp = data + (i * channels + c) * bytes_per;
      double v;
      if (fmt_code == 3) {
        float fv;
        std::memcpy(&fv, sp, 4);
        v = static_cast<double>(fv);
      } else if (bits == 16) {
        int16_t s = static_cast<int16_t>(sp[0] | (sp[1] << 8));
        v = s / 32768.0;
      } else {
        int32_t s = (sp[0] << 8) | (sp[1] << 16) | (sp[2] << 24);
        v = (s >> 8) / 8388608.0;
      }
      w.samples[static_cast<size_t>(c)][static_cast<size_t>(i)] = v;
    }
  return w;
}

void write_wav(const std::string& path, const dsp::Waveform& w, WavFormat fmt) {
  const int channels = w.channels();
  const int64_t frames = w.length();
  if (channels == 0) throw DataError("write_wav: empty waveform");
  const int bytes_per = fmt == WavFormat::kFloat32 ? 4 : 3;
  const uint32_t data_len = static_cast<uint32_t>(frames * channels * bytes_per);
  const bool is_float = fmt == WavFormat::kFloat32;

  std::string out;
  out.reserve(data_len + 64);
  out += "RIFF";
  wr_u32(out, 4 + (8 + 16) + (is_float ? 8 + 4 : 0) + 8 + data_len);
  out += "WAVE";
  out += "fmt ";
  wr_u32(out, 16);
  wr_u16(out, is_float ? 3 : 1);
  wr_u16(out, static_cast<uint16_t>(channels));
  wr_u32(out, static_cast<uint32_t>(w.sample_rate));
  wr_u32(out, static_cast<uint32_t>(w.sample_rate * channels * bytes_per));
  wr_u16(out, static_cast<uint16_t>(channels * bytes_per));
  wr_u16(out, static_cast<uint16_t>(bytes_per * 8));
  if (is_float) {
    out += "fact";
    wr_u32(out, 4);
    wr_u32(out, static_cast<uint32_t>(frames));
  }
  out += "data";
  wr_u32(out, data_len);
  for (int64_t i = 0; i < frames; ++i)
    for (int c = 0; c < channels; ++c) {
      const double v = w.samples[static_cast<size_t>(c)][static_cast<size_t>(i)];
      if (is_float) {
        float fv = static_cast<float>(v);
        char b[4];
        std::memcpy(b, &fv, 4);
        out.append(b, 4);
      } else {
        double clamped = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
        int32_t s = static_cast<int32_t>(std::lrint(clamped * 8388607.0));
        out.push_back(static_cast<char>(s & 0xff));
        out.push_back(static_cast<char>((s >> 8) & 0xff));
        out.push_back(static_cast<char>((s >> 16) & 0xff));
      }
    }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write wav file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write: " + path);
}

}  // namespace objx::io
