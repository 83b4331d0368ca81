#pragma once

// Brute-force reference implementations used only by tests. None of them call
// the library's metric, gating or resampling code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "adaptsr/core.hpp"
#include "adaptsr/parallel.hpp"
#include "adaptsr/quality.hpp"
#include "adaptsr/resource.hpp"

namespace oracle {

// Bin membership tested against both edges of every bin.
inline double ece(const std::vector<double>& conf, const std::vector<int>& correct, int M) {
  const std::size_t n = conf.size();
  double total = 0.0;
  for (int m = 0; m < M; ++m) {
    const double lo = static_cast<double>(m) / M;
    const double hi = static_cast<double>(m + 1) / M;
    double sc = 0.0, sa = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in = (m == 0) ? (conf[i] >= lo && conf[i] <= hi) : (conf[i] > lo && conf[i] <= hi);
      if (!in) continue;
      ++cnt;
      sc += conf[i];
      sa += correct[i];
    }
    if (cnt == 0) continue;
    const double c = static_cast<double>(cnt);
    total += c / static_cast<double>(n) * std::abs(sa / c - sc / c);
  }
  return total;
}

inline double brier(const std::vector<std::vector<double>>& probs, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t k = 0; k < probs[i].size(); ++k) {
      const double y = static_cast<int>(k) == labels[i] ? 1.0 : 0.0;
      total += (probs[i][k] - y) * (probs[i][k] - y);
    }
  }
  return total / static_cast<double>(probs.size());
}

// Every positive/negative pair, ties credited one half.
inline double auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Average precision: one step per distinct threshold, counting every score >= t.
inline double aupr(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds = s;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] ? tp : fp) += 1.0;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

// Explicit 3x3 kernel, long double accumulation.
inline double laplacian_variance(const adaptsr::GrayImage& img) {
  const int k[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  std::vector<long double> r;
  for (std::size_t y = 1; y + 1 < img.height(); ++y) {
    for (std::size_t x = 1; x + 1 < img.width(); ++x) {
      long double v = 0.0L;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          v += k[dy + 1][dx + 1] * static_cast<long double>(img.at(x + dx, y + dy));
        }
      }
      r.push_back(v);
    }
  }
  long double mean = 0.0L;
  for (auto v : r) mean += v;
  mean /= static_cast<long double>(r.size());
  long double var = 0.0L;
  for (auto v : r) var += (v - mean) * (v - mean);
  return static_cast<double>(var / static_cast<long double>(r.size()));
}

inline double mean_intensity(const adaptsr::GrayImage& img) {
  long double s = 0.0L;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) s += img.at(x, y);
  }
  return static_cast<double>(s / static_cast<long double>(img.size()));
}

inline double ssim(const adaptsr::GrayImage& a, const adaptsr::GrayImage& b) {
  const long double C1 = 0.0001L, C2 = 0.0009L;
  const long double n = static_cast<long double>(a.size());
  long double ma = 0.0L, mb = 0.0L;
  for (std::size_t y = 0; y < a.height(); ++y) {
    for (std::size_t x = 0; x < a.width(); ++x) {
      ma += a.at(x, y);
      mb += b.at(x, y);
    }
  }
  ma /= n;
  mb /= n;
  long double va = 0.0L, vb = 0.0L, cov = 0.0L;
  for (std::size_t y = 0; y < a.height(); ++y) {
    for (std::size_t x = 0; x < a.width(); ++x) {
      const long double da = a.at(x, y) - ma, db = b.at(x, y) - mb;
      va += da * da;
      vb += db * db;
      cov += da * db;
    }
  }
  va /= n;
  vb /= n;
  cov /= n;
  return static_cast<double>(((2 * ma * mb + C1) * (2 * cov + C2)) /
                             ((ma * ma + mb * mb + C1) * (va + vb + C2)));
}

// Levels as 0/1/2 straight from the piecewise rule.
inline int gate_level(double p, int c, double tau_low = 0.60, double tau_high = 0.85,
                      double crit = 0.70) {
  if (p <= tau_low || (c == 1 && p < crit)) return 2;
  if (p > tau_high) return 0;
  return 1;
}

inline std::vector<adaptsr::MethodPoint> pareto(const std::vector<adaptsr::MethodPoint>& pts) {
  std::vector<std::pair<std::size_t, adaptsr::MethodPoint>> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      const auto& p = pts[i];
      const auto& q = pts[j];
      dominated = q.cost <= p.cost && q.accuracy >= p.accuracy &&
                  (q.cost < p.cost || q.accuracy > p.accuracy);
    }
    if (!dominated) keep.emplace_back(i, pts[i]);
  }
  std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) {
    if (a.second.cost != b.second.cost) return a.second.cost < b.second.cost;
    return a.first < b.first;
  });
  std::vector<adaptsr::MethodPoint> out;
  for (auto& [i, m] : keep) out.push_back(m);
  return out;
}

// Subject bootstrap written from the resampling rule: subjects sorted by id,
// draw b uses mt19937_64 seeded by splitmix64(splitmix64(splitmix64(seed) ^ b) ^ attempt),
// index = engine() % k, records of each draw appended in log order.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <class Metric>
std::vector<double> bootstrap(const std::vector<adaptsr::PredictionRecord>& recs, std::uint64_t seed,
                              int resamples, Metric metric) {
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < recs.size(); ++i) by_subject[recs[i].subject_id].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [s, idx] : by_subject) groups.push_back(idx);
  std::vector<double> out;
  for (int b = 0; b < resamples; ++b) {
    std::mt19937_64 eng(mix(mix(mix(seed) ^ static_cast<std::uint64_t>(b)) ^ 0ULL));
    std::vector<adaptsr::PredictionRecord> sample;
    for (std::size_t d = 0; d < groups.size(); ++d) {
      const auto g = eng() % groups.size();
      for (auto i : groups[g]) sample.push_back(recs[i]);
    }
    out.push_back(metric(sample));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Mean of N(mu, sd) truncated to [lo, hi] by composite Simpson integration.
inline double truncated_normal_mean(double mu, double sd, double lo, double hi, int n = 200000) {
  auto pdf = [&](double x) { return std::exp(-0.5 * (x - mu) * (x - mu) / (sd * sd)); };
  const double h = (hi - lo) / n;
  double z = 0.0, m = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    z += w * pdf(x);
    m += w * x * pdf(x);
  }
  return m / z;
}

}  // namespace oracle
