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

#include "objx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "objx/datagen.hpp"
#include "objx/errors.hpp"
#include "objx/model.hpp"
#include "objx/wav.hpp"

namespace objx::eval {

namespace fs = std::filesystem;

double si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size())
    throw ShapeError("si_sdr: length mismatch");
  double rr = 0.0, er = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    er += est[i] * ref[i];
  }
  if (rr <= 0.0) throw ValidationError("si_sdr: all-zero reference");
  const double alpha = er / rr;
  double sig = 0.0, err = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * ref[i];
    const double d = s - est[i];
    sig += s * s;
    err += d * d;
  }
  constexpr double kEps = 1e-30;
  const double db = 10.0 * std::log10(sig / (err + kEps) + kEps);
  return std::min(kSiSdrCapDb, std::max(-kSiSdrCapDb, db));
}

std::vector<double> baseline_mono(const dsp::Waveform& mix51) {
  if (mix51.channels() != 6) throw ShapeError("baseline_mono: 5.1 mix expected");
  const int64_t n = mix51.length();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int c : {0, 1, 2, 4, 5})
    for (int64_t i = 0; i < n; ++i)
      out[static_cast<size_t>(i)] += mix51.samples[static_cast<size_t>(c)][static_cast<size_t>(i)];
  for (auto& v : out) v /= 5.0;
  return out;
}

std::array<std::vector<double>, 3> baseline_three(const dsp::Waveform& mix51) {
  if (mix51.channels() != 6) throw ShapeError("baseline_three: 5.1 mix expected");
  const int64_t n = mix51.length();
  std::array<std::vector<double>, 3> out;
  for (auto& v : out) v.assign(static_cast<size_t>(n), 0.0);
  const auto& L = mix51.samples[0];
  const auto& R = mix51.samples[1];
  const auto& C = mix51.samples[2];
  const auto& Ls = mix51.samples[4];
  const auto& Rs = mix51.samples[5];
  for (int64_t i = 0; i < n; ++i) {
    const size_t j = static_cast<size_t>(i);
    out[0][j] = (2.0 * L[j] + C[j]) / 3.0;
    out[1][j] = (2.0 * R[j] + C[j]) / 3.0;
    out[2][j] = (Ls[j] + Rs[j]) / 2.0;
  }
  return out;
}

dsp::Waveform baseline_bed(const dsp::Waveform& mix51) {
  if (mix51.channels() != 6) throw ShapeError("baseline_bed: 5.1 mix expected");
  return mix51;
}

spatial::ObjectProduction ibm_extract(const dsp::StftTensor& mix,
                                      const spatial::ObjectProduction& truth,
                                      bool mel_grouped) {
  mix.check_consistent("ibm_extract");
  if (mix.channels() != 6) throw ShapeError("ibm_extract: 5.1 mix expected");
  if (truth.objects.empty()) throw ValidationError("ibm_extract: missing truth");
  const int T = mix.frames(), F = mix.freqs();
  const int64_t plane = static_cast<int64_t>(T) * F;
  static const int kPos[5] = {0, 1, 2, 4, 5};
  const auto& l51 = spatial::SpeakerLayout::get("5.1");
  const dsp::MelFilterbank fb = dsp::build_mel_filterbank(dsp::kMelBands, F);

  std::vector<Tensor> masks;
  for (const auto& obj : truth.objects) {
    const dsp::StftTensor clean = spatial::render_single_object(obj.stft, obj.traj, l51);
    Tensor mask({5, T, F});
    if (!mel_grouped) {
      for (int c = 0; c < 5; ++c)
        for (int64_t i = 0; i < plane; ++i) {
          const int64_t src = kPos[c] * plane + i;
          const double sr = clean.re[static_cast<size_t>(src)];
          const double si = clean.im[static_cast<size_t>(src)];
          const double xr = mix.re[static_cast<size_t>(src)] - sr;
          const double xi = mix.im[static_cast<size_t>(src)] - si;
          const double es = sr * sr + si * si;
          // Dominance needs presence: fully silent bins stay with the bed.
          mask[static_cast<size_t>(c * plane + i)] =
              (es > 0.0 && es >= xr * xr + xi * xi) ? 1.0 : 0.0;
        }
    } else {
      // Decide on mel-band energies, then broadcast the binary mel mask.
      Tensor mel_mask({5, T, fb.n_bands});
      for (int c = 0; c < 5; ++c)
        for (int t = 0; t < T; ++t) {
          const int64_t off = (static_cast<int64_t>(kPos[c]) * T + t) * F;
          for (int b = 0; b < fb.n_bands; ++b) {
            const double* w = fb.weights.data() + static_cast<int64_t>(b) * F;
            double es = 0.0, ex = 0.0;
            for (int f = fb.lo[static_cast<size_t>(b)]; f < fb.hi[static_cast<size_t>(b)]; ++f) {
              const double sr = clean.re[static_cast<size_t>(off + f)];
              const double si = clean.im[static_cast<size_t>(off + f)];
              const double xr = mix.re[static_cast<size_t>(off + f)] - sr;
              const double xi = mix.im[static_cast<size_t>(off + f)] - si;
              es += w[f] * (sr * sr + si * si);
              ex += w[f] * (xr * xr + xi * xi);
            }
            mel_mask[static_cast<size_t>((c * T + t) * fb.n_bands + b)] =
                (es > 0.0 && es >= ex) ? 1.0 : 0.0;
          }
        }
      mask = dsp::broadcast_mel_mask(mel_mask, fb);
    }
    masks.push_back(std::move(mask));
  }
  model::EncodeOptions opts;
  opts.depan.smooth = false;
  return model::extract_from_linear_masks(mix, masks, nullptr, opts);
}

namespace {

double median_of_sorted(const std::vector<double>& v) {
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

PermResult best_permutation_from_matrix(
    const std::vector<std::vector<double>>& score) {
  const int n = static_cast<int>(score.size());
  if (n < 1 || n > 3) throw ShapeError("best_permutation: 1..3 sources");
  for (const auto& row : score)
    if (static_cast<int>(row.size()) != n)
      throw ShapeError("best_permutation: square score matrix expected");

  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;

  PermResult best;
  double best_median = -1e300, best_mean = -1e300;
  std::vector<int> p = idx;
  // std::next_permutation enumerates in lexicographic order; strict
  // improvement keeps the first among ties.
  do {
    std::vector<double> vals(static_cast<size_t>(n));
    double mean = 0.0;
    for (int j = 0; j < n; ++j) {
      vals[static_cast<size_t>(j)] = score[static_cast<size_t>(p[static_cast<size_t>(j)])][static_cast<size_t>(j)];
      mean += vals[static_cast<size_t>(j)];
    }
    mean /= n;
    std::vector<double> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    const double med = median_of_sorted(sorted);
    const bool better =
        med > best_median || (med == best_median && mean > best_mean);
    if (better) {
      best_median = med;
      best_mean = mean;
      best.perm = p;
      best.si_sdr = vals;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

PermResult best_permutation(const std::vector<std::vector<double>>& est,
                            const std::vector<std::vector<double>>& ref) {
  if (est.size() != ref.size())
    throw ShapeError("best_permutation: source count mismatch");
  const int n = static_cast<int>(est.size());
  std::vector<std::vector<double>> score(static_cast<size_t>(n),
                                         std::vector<double>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      score[static_cast<size_t>(i)][static_cast<size_t>(j)] = si_sdr(est[static_cast<size_t>(i)], ref[static_cast<size_t>(j)]);
  return best_permutation_from_matrix(score);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = static_cast<size_t>(std::ceil(rank));
  const double w = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - w) + values[hi] * w;
}

FiveNumber five_number(const std::vector<double>& values) {
  FiveNumber f;
  f.count = static_cast<int>(values.size());
  if (values.empty()) return f;
  f.min = *std::min_element(values.begin(), values.end());
  f.max = *std::max_element(values.begin(), values.end());
  f.q1 = quantile(values, 0.25);
  f.median = quantile(values, 0.5);
  f.q3 = quantile(values, 0.75);
  return f;
}

namespace {

struct ExcerptTruth {
  dsp::Waveform mix;
  std::vector<std::vector<double>> objects;  // mono waves
  std::vector<spatial::Trajectory> trajs;
  dsp::Waveform bed;
};

ExcerptTruth load_truth(const fs::path& dir, int n_objects) {
  ExcerptTruth t;
  t.mix = io::read_wav((dir / "mix_51.wav").string());
  for (int o = 0; o < n_objects; ++o) {
    dsp::Waveform w = io::read_wav((dir / ("obj_" + std::to_string(o) + ".wav")).string());
    if (w.channels() != 1) throw DataError("object wav must be mono");
    t.objects.push_back(std::move(w.samples[0]));
    t.trajs.push_back(datagen::read_trajectory_csv(
        (dir / ("obj_" + std::to_string(o) + ".csv")).string()));
  }
  t.bed = io::read_wav((dir / "bed.wav").string());
  return t;
}

struct MethodOutput {
  std::vector<std::vector<double>> objects;
  dsp::Waveform bed;
  bool has_bed = false;
};

MethodOutput load_method(const fs::path& dir, int n_objects) {
  MethodOutput m;
  for (int o = 0; o < n_objects; ++o) {
    dsp::Waveform w = io::read_wav((dir / ("obj_" + std::to_string(o) + ".wav")).string());
    if (w.channels() != 1) throw DataError("method object wav must be mono");
    m.objects.push_back(std::move(w.samples[0]));
  }
  const fs::path bed = dir / "bed.wav";
  if (fs::exists(bed)) {
    m.bed = io::read_wav(bed.string());
    m.has_bed = true;
  }
  return m;
}

double bed_si_sdr(const dsp::Waveform& est, const dsp::Waveform& ref) {
  if (est.channels() != 6 || ref.channels() != 6)
    throw ShapeError("bed si-sdr: 5.1 expected");
  double acc = 0.0;
  for (int c : {0, 1, 2, 4, 5})
    acc += si_sdr(est.samples[static_cast<size_t>(c)], ref.samples[static_cast<size_t>(c)]);
  return acc / 5.0;
}

std::string perm_string(const std::vector<int>& p) {
  std::string s;
  for (int v : p) s += std::to_string(v);
  return s;
}

spatial::ObjectProduction production_from_waves(
    const std::vector<std::vector<double>>& objects,
    const std::vector<spatial::Trajectory>& trajs, const dsp::Waveform& bed) {
  spatial::ObjectProduction prod;
  for (size_t o = 0; o < objects.size(); ++o) {
    spatial::ObjectTrack obj;
    obj.stft = dsp::stft_mono(objects[o]);
    obj.traj = trajs[o];
    prod.objects.push_back(std::move(obj));
  }
  prod.bed = dsp::stft(bed);
  return prod;
}

// Object rows + bed row for one method on one excerpt.
void method_rows(EvalReport& report, const std::string& excerpt,
                 const std::string& method,
                 const std::vector<std::vector<double>>& est_objects,
                 const dsp::Waveform* est_bed, const ExcerptTruth& truth,
                 const std::vector<double>& baseline_per_slot,
                 double baseline_bed_db) {
  PermResult pr = best_permutation(est_objects, truth.objects);
  for (size_t j = 0; j < truth.objects.size(); ++j) {
    EvalRow row;
    row.excerpt = excerpt;
    row.method = method;
    row.slot = "obj_" + std::to_string(j);
    row.si_sdr_db = pr.si_sdr[j];
    row.baseline_db = baseline_per_slot[j];
    row.si_sdri_db = row.si_sdr_db - row.baseline_db;
    row.permutation = perm_string(pr.perm);
    report.rows.push_back(std::move(row));
  }
  if (est_bed) {
    EvalRow row;
    row.excerpt = excerpt;
    row.method = method;
    row.slot = "bed";
    row.si_sdr_db = bed_si_sdr(*est_bed, truth.bed);
    row.baseline_db = baseline_bed_db;
    row.si_sdri_db = row.si_sdr_db - row.baseline_db;
    row.permutation = "-";
    report.rows.push_back(std::move(row));
  }
}

}  // namespace

EvalReport evaluate(const std::string& dataset_dir, const EvalOptions& opts) {
  const fs::path root(dataset_dir);
  std::ifstream mf(root / "manifest.json");
  if (!mf) throw DataError("dataset manifest not found in " + dataset_dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest: " + std::string(e.what()));
  }
  const int n_objects = manifest.at("n_objects").get<int>();

  EvalReport report;
  for (const auto& entry : manifest.at("excerpts")) {
    const std::string name = entry.at("dir").get<std::string>();
    const fs::path dir = root / name;
    ExcerptTruth truth;
    try {
      truth = load_truth(dir, n_objects);
    } catch (const Error& e) {
      report.warnings.push_back(name + ": " + e.what() + " (skipped)");
      continue;
    }

    // Downmix baseline, permutation-optimized for the 3-object case.
    std::vector<std::vector<double>> baseline_objs;
    if (n_objects == 1) {
      baseline_objs.push_back(baseline_mono(truth.mix));
    } else {
      auto three = baseline_three(truth.mix);
      // The 3-channel downmix serves all three slots (n==3 only).
      for (auto& b : three) baseline_objs.push_back(std::move(b));
      while (static_cast<int>(baseline_objs.size()) > n_objects)
        baseline_objs.pop_back();
    }
    PermResult bl = best_permutation(baseline_objs, truth.objects);
    const double bl_bed = bed_si_sdr(baseline_bed(truth.mix), truth.bed);

    // The baseline as a method: SI-SDRi identically zero.
    method_rows(report, name, "baseline", baseline_objs, &truth.mix, truth,
                bl.si_sdr, bl_bed);

    if (opts.include_ibm) {
      const dsp::StftTensor mix_stft = dsp::stft(truth.mix);
      spatial::ObjectProduction truth_prod =
          production_from_waves(truth.objects, truth.trajs, truth.bed);
      for (bool mel : {false, true}) {
        spatial::ObjectProduction ibm = ibm_extract(mix_stft, truth_prod, mel);
        std::vector<std::vector<double>> est;
        for (const auto& obj : ibm.objects)
          est.push_back(std::move(dsp::istft(obj.stft).samples[0]));
        dsp::Waveform bed = dsp::istft(ibm.bed);
        method_rows(report, name, mel ? "ibm_mel" : "ibm", est, &bed, truth,
                    bl.si_sdr, bl_bed);
      }
    }

    if (!opts.method_dir.empty()) {
      const fs::path mdir = fs::path(opts.method_dir) / name;
      try {
        MethodOutput mo = load_method(mdir, n_objects);
        method_rows(report, name, opts.method_label, mo.objects,
                    mo.has_bed ? &mo.bed : nullptr, truth, bl.si_sdr, bl_bed);
      } catch (const Error& e) {
        report.warnings.push_back(name + ": " + e.what() + " (method skipped)");
      }
    }
  }

  std::map<std::string, std::vector<double>> obj_vals, bed_vals;
  for (const auto& row : report.rows) {
    if (row.slot == "bed")
      bed_vals[row.method].push_back(row.si_sdri_db);
    else
      obj_vals[row.method].push_back(row.si_sdri_db);
  }
  for (const auto& [m, v] : obj_vals) report.object_summary[m] = five_number(v);
  for (const auto& [m, v] : bed_vals) report.bed_summary[m] = five_number(v);
  return report;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write report: " + path);
  f << "excerpt,method,slot,si_sdr_db,baseline_db,si_sdri_db,permutation\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%.6f,%s\n",
                  r.excerpt.c_str(), r.method.c_str(), r.slot.c_str(),
                  r.si_sdr_db, r.baseline_db, r.si_sdri_db,
                  r.permutation.c_str());
    f << buf;
  }
}

void write_boxplot_csv(const std::string& path,
                       const std::map<std::string, FiveNumber>& summary) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write boxplot data: " + path);
  f << "method,count,min,q1,median,q3,max\n";
  char buf[200];
  for (const auto& [m, s] : summary) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  m.c_str(), s.count, s.min, s.q1, s.median, s.q3, s.max);
    f << buf;
  }
}

}  // namespace objx::eval
