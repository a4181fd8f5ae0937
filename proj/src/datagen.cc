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

#include "objx/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "objx/errors.hpp"
#include "objx/fft.hpp"
#include "objx/rng.hpp"
#include "objx/threading.hpp"
#include "objx/wav.hpp"

namespace objx::datagen {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

double rms_of(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void normalize_rms(std::vector<double>& x, double target) {
  const double r = rms_of(x);
  if (r <= 0.0) throw ValidationError("gen_source: silent source");
  const double s = target / r;
  for (double& v : x) v *= s;
}

// Natural cubic spline through (t_k, y_k) with uniform knot spacing.
std::vector<double> spline_eval(const std::vector<double>& knots_t,
                                const std::vector<double>& knots_y, int frames) {
  const int k = static_cast<int>(knots_t.size());
  std::vector<double> out(static_cast<size_t>(frames));
  if (k == 1) {
    std::fill(out.begin(), out.end(), knots_y[0]);
    return out;
  }
  // Second derivatives, natural boundary (Thomas algorithm).
  std::vector<double> m(static_cast<size_t>(k), 0.0);
  if (k > 2) {
    const int n = k - 2;
    std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n)),
        c(static_cast<size_t>(n)), d(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double h0 = knots_t[static_cast<size_t>(i + 1)] - knots_t[static_cast<size_t>(i)];
      const double h1 = knots_t[static_cast<size_t>(i + 2)] - knots_t[static_cast<size_t>(i + 1)];
      a[static_cast<size_t>(i)] = h0;
      b[static_cast<size_t>(i)] = 2.0 * (h0 + h1);
      c[static_cast<size_t>(i)] = h1;
      d[static_cast<size_t>(i)] =
          6.0 * ((knots_y[static_cast<size_t>(i + 2)] - knots_y[static_cast<size_t>(i + 1)]) / h1 -
                 (knots_y[static_cast<size_t>(i + 1)] - knots_y[static_cast<size_t>(i)]) / h0);
    }
    for (int i = 1; i < n; ++i) {
      const double w = a[static_cast<size_t>(i)] / b[static_cast<size_t>(i - 1)];
      b[static_cast<size_t>(i)] -= w * c[static_cast<size_t>(i - 1)];
      d[static_cast<size_t>(i)] -= w * d[static_cast<size_t>(i - 1)];
    }
    m[static_cast<size_t>(n)] = d[static_cast<size_t>(n - 1)] / b[static_cast<size_t>(n - 1)];
    for (int i = n - 2; i >= 0; --i)
      m[static_cast<size_t>(i + 1)] = (d[static_cast<size_t>(i)] -
                                       c[static_cast<size_t>(i)] * m[static_cast<size_t>(i + 2)]) /
                                      b[static_cast<size_t>(i)];
  }
  int seg = 0;
  for (int f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f);
    while (seg + 2 < k && knots_t[static_cast<size_t>(seg + 1)] < t) ++seg;
    const double t0 = knots_t[static_cast<size_t>(seg)], t1 = knots_t[static_cast<size_t>(seg + 1)];
    const double h = t1 - t0;
    const double u = (t1 - t) / h, v = (t - t0) / h;
    out[static_cast<size_t>(f)] =
        u * knots_y[static_cast<size_t>(seg)] + v * knots_y[static_cast<size_t>(seg + 1)] +
        ((u * u * u - u) * m[static_cast<size_t>(seg)] +
         (v * v * v - v) * m[static_cast<size_t>(seg + 1)]) *
            (h * h) / 6.0;
  }
  return out;
}

// RBJ biquad, direct form 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  double step(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
  static Biquad lowpass(double fc, double q) {
    Biquad f;
    const double w = kTwoPi * fc / dsp::kSampleRate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    f.b0 = (1.0 - c) / 2.0 / a0;
    f.b1 = (1.0 - c) / a0;
    f.b2 = f.b0;
    f.a1 = -2.0 * c / a0;
    f.a2 = (1.0 - alpha) / a0;
    return f;
  }
  static Biquad highpass(double fc, double q) {
    Biquad f;
    const double w = kTwoPi * fc / dsp::kSampleRate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    f.b0 = (1.0 + c) / 2.0 / a0;
    f.b1 = -(1.0 + c) / a0;
    f.b2 = f.b0;
    f.a1 = -2.0 * c / a0;
    f.a2 = (1.0 - alpha) / a0;
    return f;
  }
};

// Paul Kellet's pink noise filter over white gaussian noise.
std::vector<double> pink_noise(Rng& rng, int64_t n) {
  std::vector<double> out(static_cast<size_t>(n));
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    const double p = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
    out[static_cast<size_t>(i)] = 0.11 * p;
  }
  return out;
}

std::vector<double> gen_tone(Rng& rng, int64_t n) {
  const double f0 = rng.uniform(200.0, 4000.0);
  const double fam = rng.uniform(0.3, 4.0);
  const double depth = rng.uniform(0.3, 0.8);
  const double ph0 = rng.uniform(0.0, kTwoPi);
  const double pham = rng.uniform(0.0, kTwoPi);
  std::vector<double> x(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / dsp::kSampleRate;
    x[static_cast<size_t>(i)] = (1.0 + depth * std::sin(kTwoPi * fam * t + pham)) *
                                std::sin(kTwoPi * f0 * t + ph0);
  }
  return x;
}

std::vector<double> gen_chirp(Rng& rng, int64_t n) {
  const double f1 = rng.uniform(100.0, 500.0);
  const double f2 = rng.uniform(2000.0, 16000.0);
  const double ph0 = rng.uniform(0.0, kTwoPi);
  const double dur = static_cast<double>(n) / dsp::kSampleRate;
  const double lnk = std::log(f2 / f1);
  std::vector<double> x(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / dsp::kSampleRate;
    const double phase = kTwoPi * f1 * dur / lnk * (std::exp(lnk * t / dur) - 1.0);
    x[static_cast<size_t>(i)] = std::sin(phase + ph0);
  }
  return x;
}

std::vector<double> gen_noise_burst(Rng& rng, int64_t n) {
  std::vector<double> x = pink_noise(rng, n);
  const double f_lo = rng.uniform(100.0, 1000.0);
  const double f_hi = rng.uniform(2.0 * f_lo, 12000.0);
  Biquad hp = Biquad::highpass(f_lo, 0.707);
  Biquad lp = Biquad::lowpass(f_hi, 0.707);
  for (auto& v : x) v = lp.step(hp.step(v));
  // Gated envelope: a few raised-cosine bursts.
  std::vector<double> env(static_cast<size_t>(n), 0.0);
  const int bursts = rng.uniform_int(3, 8);
  const double ramp = 0.02 * dsp::kSampleRate;
  for (int b = 0; b < bursts; ++b) {
    const int64_t start = static_cast<int64_t>(rng.uniform(0.0, 0.9) * n);
    const int64_t dur =
        static_cast<int64_t>(rng.uniform(0.2, 1.0) * dsp::kSampleRate);
    const int64_t end = std::min<int64_t>(n, start + dur);
    for (int64_t i = start; i < end; ++i) {
      const double din = static_cast<double>(i - start);
      const double dout = static_cast<double>(end - 1 - i);
      double g = 1.0;
      if (din < ramp) g = std::min(g, 0.5 - 0.5 * std::cos(kPi * din / ramp));
      if (dout < ramp) g = std::min(g, 0.5 - 0.5 * std::cos(kPi * dout / ramp));
      env[static_cast<size_t>(i)] = std::max(env[static_cast<size_t>(i)], g);
    }
  }
  for (int64_t i = 0; i < n; ++i) x[static_cast<size_t>(i)] *= env[static_cast<size_t>(i)];
  if (rms_of(x) <= 0.0) {
    // All bursts may have landed on the tail; force one at the head.
    for (int64_t i = 0; i < std::min<int64_t>(n, 24000); ++i)
      x[static_cast<size_t>(i)] = pink_noise(rng, 1)[0];
  }
  return x;
}

std::vector<double> gen_pulse_train(Rng& rng, int64_t n) {
  const double rate = rng.uniform(2.0, 12.0);
  const double decay = 0.005 * dsp::kSampleRate;  // 5 ms
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  double pos = rng.uniform(0.0, dsp::kSampleRate / rate);
  while (pos < static_cast<double>(n)) {
    const double amp = rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const int64_t start = static_cast<int64_t>(pos);
    for (int64_t i = start; i < std::min<int64_t>(n, start + 2048); ++i)
      x[static_cast<size_t>(i)] += amp * std::exp(-static_cast<double>(i - start) / decay);
    const double period = dsp::kSampleRate / rate;
    pos += period * rng.uniform(0.8, 1.2);
  }
  return x;
}

std::vector<double> gen_corpus(Rng& rng, int64_t n, const std::string& dir) {
  if (dir.empty()) throw DataError("corpus source kind needs a corpus directory");
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no wav files in corpus dir: " + dir);
  const auto& path = files[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int>(files.size()) - 1))];
  dsp::Waveform w = io::read_wav(path);
  if (w.sample_rate != dsp::kSampleRate)
    throw DataError("corpus file not 48 kHz: " + path);
  const int64_t len = w.length();
  std::vector<double> mono(static_cast<size_t>(len), 0.0);
  for (const auto& ch : w.samples)
    for (int64_t i = 0; i < len; ++i) mono[static_cast<size_t>(i)] += ch[static_cast<size_t>(i)];
  for (auto& v : mono) v /= w.channels();
  std::vector<double> out(static_cast<size_t>(n));
  if (len >= n) {
    const int64_t off = len == n ? 0 : static_cast<int64_t>(rng.uniform(0.0, 1.0) * (len - n));
    std::copy_n(mono.begin() + off, n, out.begin());
  } else {
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = mono[static_cast<size_t>(i % len)];
  }
  return out;
}

}  // namespace

std::string kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::kTone: return "tone";
    case SourceKind::kChirp: return "chirp";
    case SourceKind::kNoiseBurst: return "noise";
    case SourceKind::kPulseTrain: return "pulse";
    case SourceKind::kCorpus: return "corpus";
  }
  return "?";
}

SourceKind kind_from_name(const std::string& name) {
  if (name == "tone") return SourceKind::kTone;
  if (name == "chirp") return SourceKind::kChirp;
  if (name == "noise") return SourceKind::kNoiseBurst;
  if (name == "pulse") return SourceKind::kPulseTrain;
  if (name == "corpus") return SourceKind::kCorpus;
  throw DataError("unknown source kind: " + name);
}

spatial::Trajectory gen_trajectory(const TrajectorySpec& spec, uint64_t seed,
                                   int frames) {
  if (spec.waypoints < 1) throw ValidationError("trajectory: waypoints >= 1");
  Rng rng(Rng::mix(seed, 0x7472616aULL));
  const int k = spec.waypoints;
  std::vector<double> tx(static_cast<size_t>(k)), wx(static_cast<size_t>(k)),
      wy(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    wx[static_cast<size_t>(i)] = rng.uniform(0.05, 0.95);
    wy[static_cast<size_t>(i)] = rng.uniform(0.05, 0.95);
    tx[static_cast<size_t>(i)] =
        k == 1 ? 0.0 : static_cast<double>(i) * (frames - 1) / (k - 1);
  }
  const auto xs = spline_eval(tx, wx, frames);
  const auto ys = spline_eval(tx, wy, frames);
  spatial::Trajectory out;
  out.p.resize(static_cast<size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    auto clamp = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    out.p[static_cast<size_t>(f)] =
        spatial::Position{clamp(xs[static_cast<size_t>(f)]), clamp(ys[static_cast<size_t>(f)])};
  }
  return out;
}

std::vector<double> gen_source(SourceKind kind, uint64_t seed, int64_t length,
                               const std::string& corpus_dir) {
  Rng rng(Rng::mix(seed, static_cast<uint64_t>(kind) + 0x736f7572ULL));
  std::vector<double> x;
  switch (kind) {
    case SourceKind::kTone: x = gen_tone(rng, length); break;
    case SourceKind::kChirp: x = gen_chirp(rng, length); break;
    case SourceKind::kNoiseBurst: x = gen_noise_burst(rng, length); break;
    case SourceKind::kPulseTrain: x = gen_pulse_train(rng, length); break;
    case SourceKind::kCorpus: x = gen_corpus(rng, length, corpus_dir); break;
  }
  normalize_rms(x, 0.1);
  return x;
}

dsp::Waveform gen_bed(uint64_t seed, double channel_rms, int64_t length) {
  if (length < 4 || (length & (length - 1)) != 0)
    throw ShapeError("gen_bed: length must be a power of two");
  dsp::Waveform bed = dsp::Waveform::zeros(6, length);
  bed.labels = {"L", "R", "C", "LFE", "Ls", "Rs"};
  static const int kPosIdx[5] = {0, 1, 2, 4, 5};
  for (int c = 0; c < 5; ++c) {
    Rng rng(Rng::mix(seed, 0x626564ULL + static_cast<uint64_t>(c)));
    auto x = pink_noise(rng, length);
    normalize_rms(x, channel_rms);
    bed.samples[static_cast<size_t>(kPosIdx[c])] = std::move(x);
  }
  // LFE: spectrally band-limited noise, flat to 100 Hz then a cosine
  // roll-off to 120 Hz.
  {
    Rng rng(Rng::mix(seed, 0x6c6665ULL));
    std::vector<double> x(static_cast<size_t>(length));
    for (auto& v : x) v = rng.normal();
    RealFft fft(static_cast<int>(length));
    std::vector<std::complex<double>> spec(static_cast<size_t>(length / 2 + 1));
    fft.forward(x.data(), spec.data());
    const double bin_hz = static_cast<double>(dsp::kSampleRate) / static_cast<double>(length);
    for (size_t i = 0; i < spec.size(); ++i) {
      const double hz = bin_hz * static_cast<double>(i);
      double g = 0.0;
      if (hz <= 100.0)
        g = 1.0;
      else if (hz < 120.0)
        g = 0.5 + 0.5 * std::cos(kPi * (hz - 100.0) / 20.0);
      spec[i] *= g;
    }
    fft.inverse(spec.data(), x.data());
    normalize_rms(x, channel_rms);
    bed.samples[3] = std::move(x);
  }
  return bed;
}

Scene assemble_scene(const SceneSpec& spec) {
  if (spec.n_objects < 1 || spec.n_objects > 3)
    throw ValidationError("scene: n_objects must be 1..3");
  if (spec.kinds.empty()) throw ValidationError("scene: no source kinds");
  Scene sc;
  sc.object_rms = spec.level.object_rms;
  sc.bed_rms = spec.level.object_rms * std::pow(10.0, spec.level.bed_gain_db / 20.0);

  for (int o = 0; o < spec.n_objects; ++o) {
    Rng pick(Rng::mix(spec.seed, 0x6b696e64ULL + static_cast<uint64_t>(o)));
    const SourceKind kind = spec.kinds[static_cast<size_t>(
        pick.uniform_int(0, static_cast<int>(spec.kinds.size()) - 1))];
    sc.kinds.push_back(kind);
    auto wave = gen_source(kind, Rng::mix(spec.seed, 100 + static_cast<uint64_t>(o)),
                           dsp::kExcerptSamples, spec.corpus_dir);
    if (spec.level.object_rms != 0.1)
      for (auto& v : wave) v *= spec.level.object_rms / 0.1;
    spatial::ObjectTrack obj;
    obj.traj = gen_trajectory(spec.traj, Rng::mix(spec.seed, 200 + static_cast<uint64_t>(o)));
    obj.stft = dsp::stft_mono(wave);
    sc.truth.objects.push_back(std::move(obj));
    sc.object_waves.push_back(std::move(wave));
  }

  sc.bed_wave = gen_bed(Rng::mix(spec.seed, 300), sc.bed_rms);
  sc.truth.bed = dsp::stft(sc.bed_wave);

  for (const auto& name : spatial::SpeakerLayout::names())
    sc.renders.emplace(name, spatial::render(sc.truth, spatial::SpeakerLayout::get(name)));
  return sc;
}

void write_trajectory_csv(const std::string& path, const spatial::Trajectory& t) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write trajectory csv: " + path);
  f << "frame,x,y\n";
  char buf[64];
  for (int i = 0; i < t.frames(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", i,
                  t.p[static_cast<size_t>(i)].x, t.p[static_cast<size_t>(i)].y);
    f << buf;
  }
}

spatial::Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open trajectory csv: " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("frame,x,y", 0) != 0)
    throw DataError("bad trajectory csv header: " + path);
  spatial::Trajectory t;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    int frame;
    double x, y;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &frame, &x, &y) != 3)
      throw DataError("bad trajectory csv row: " + path);
    t.p.push_back(spatial::Position{x, y});
  }
  return t;
}

void make_eval_set(const SceneSpec& spec, int n_excerpts,
                   const std::string& out_dir, int jobs) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<nlohmann::ordered_json> entries(static_cast<size_t>(n_excerpts));

  const int nt = jobs < 1 ? 1 : jobs;
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(dynamic)
  for (int e = 0; e < n_excerpts; ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "excerpt_%04d", e);
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir);
    SceneSpec es = spec;
    es.seed = Rng::mix(spec.seed, 0x657863ULL, static_cast<uint64_t>(e));
    Scene sc = assemble_scene(es);

    static const std::map<std::string, std::string> kLayoutFile = {
        {"2.0", "mix_20.wav"}, {"5.1", "mix_51.wav"},
        {"7.1", "mix_71.wav"}, {"9.1", "mix_91.wav"}};
    for (const auto& [lname, fname] : kLayoutFile)
      io::write_wav((dir / fname).string(), dsp::istft(sc.renders.at(lname)));
    // Ground-truth audio goes through the same analysis/synthesis pair as
    // every extracted track, so comparisons share the synthesis taper.
    for (int o = 0; o < es.n_objects; ++o) {
      io::write_wav((dir / ("obj_" + std::to_string(o) + ".wav")).string(),
                    dsp::istft(sc.truth.objects[static_cast<size_t>(o)].stft));
      write_trajectory_csv((dir / ("obj_" + std::to_string(o) + ".csv")).string(),
                           sc.truth.objects[static_cast<size_t>(o)].traj);
    }
    io::write_wav((dir / "bed.wav").string(), dsp::istft(sc.truth.bed));

    nlohmann::ordered_json entry;
    entry["dir"] = name;
    entry["seed"] = es.seed;
    std::vector<std::string> kinds;
    for (auto k : sc.kinds) kinds.push_back(kind_name(k));
    entry["kinds"] = kinds;
    entry["object_rms"] = sc.object_rms;
    entry["bed_rms"] = sc.bed_rms;
    entries[static_cast<size_t>(e)] = std::move(entry);
  }

  nlohmann::ordered_json manifest;
  manifest["n_excerpts"] = n_excerpts;
  manifest["n_objects"] = spec.n_objects;
  manifest["seed"] = spec.seed;
  manifest["excerpts"] = entries;
  std::ofstream f(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!f) throw DataError("cannot write manifest: " + out_dir);
  f << manifest.dump(2) << "\n";
}

}  // namespace objx::datagen
