#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specforge/core/errors.hpp"

#include <json.hpp>

namespace specforge::eval {

// confusion[true][pred]
using Confusion = std::vector<std::vector<std::size_t>>;

inline Confusion make_confusion(const std::vector<int>& truth, const std::vector<int>& pred,
                                std::size_t n_classes) {
  if (truth.size() != pred.size()) throw ShapeError("confusion: size mismatch");
  Confusion m(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  return m;
}

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t support = 0;
};

inline std::vector<ClassMetrics> per_class_metrics(const Confusion& m) {
  const std::size_t c = m.size();
  std::vector<ClassMetrics> out(c);
  for (std::size_t k = 0; k < c; ++k) {
    if (m[k].size() != c) throw ShapeError("confusion must be square");
    std::size_t tp = m[k][k], row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += m[k][j];
      col += m[j][k];
    }
    out[k].support = row;
    out[k].precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    out[k].recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    out[k].f1 = (out[k].precision + out[k].recall) > 0.0
                    ? 2.0 * out[k].precision * out[k].recall / (out[k].precision + out[k].recall)
                    : 0.0;
  }
  return out;
}

// Unweighted mean of per-class F1; zero-support classes contribute 0.
inline double macro_f1(const Confusion& m) {
  const auto pc = per_class_metrics(m);
  if (pc.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& c : pc) acc += c.f1;
  return acc / static_cast<double>(pc.size());
}

inline double accuracy(const Confusion& m) {
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) {
      total += m[i][j];
      if (i == j) correct += m[i][j];
    }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

struct MetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  Confusion confusion;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline MetricReport make_report(const Confusion& m, std::uint64_t seed,
                                const std::string& config_hash = "") {
  MetricReport r;
  r.confusion = m;
  r.per_class = per_class_metrics(m);
  r.macro_f1 = macro_f1(m);
  r.accuracy = accuracy(m);
  r.seed = seed;
  r.config_hash = config_hash;
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["seed"] = r.seed;
  if (!r.config_hash.empty()) j["config_hash"] = r.config_hash;
  j["confusion"] = r.confusion;
  nlohmann::json pc = nlohmann::json::array();
  for (const auto& c : r.per_class)
    pc.push_back({{"precision", c.precision},
                  {"recall", c.recall},
                  {"f1", c.f1},
                  {"support", c.support}});
  j["per_class"] = pc;
  return j;
}

}  // namespace specforge::eval
