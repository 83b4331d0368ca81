#pragma once

#include <random>
#include <string>
#include <vector>

#include "adaptsr/core.hpp"
#include "adaptsr/quality.hpp"

namespace testutil {

inline adaptsr::PredictionRecord make_record(std::string subject, int true_class, int predicted,
                                             double conf, int criticality = 0) {
  adaptsr::PredictionRecord r;
  r.subject_id = std::move(subject);
  r.clip_id = r.subject_id + "_c" + std::to_string(true_class) + "_" + std::to_string(predicted);
  r.true_class = true_class;
  r.probs = adaptsr::spread_probs(predicted, conf);
  r.confidence = conf;
  r.criticality = criticality;
  r.blur = 0.0;
  r.lighting = 0.5;
  return r;
}

// Random valid record; confidences above 1/7 so the spread class stays on top.
inline adaptsr::PredictionRecord random_record(std::mt19937_64& g, int n_subjects = 5) {
  std::uniform_int_distribution<int> cls(0, adaptsr::kNumClasses - 1);
  std::uniform_int_distribution<int> subj(0, n_subjects - 1);
  std::uniform_real_distribution<double> u(0.15, 1.0);
  auto r = make_record("S" + std::to_string(subj(g)), cls(g), cls(g), u(g), subj(g) % 2);
  r.blur = u(g);
  r.lighting = u(g);
  return r;
}

inline adaptsr::GrayImage random_image(std::mt19937_64& g, std::size_t w, std::size_t h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(w * h);
  for (auto& v : px) v = u(g);
  return adaptsr::GrayImage(w, h, std::move(px));
}

}  // namespace testutil
