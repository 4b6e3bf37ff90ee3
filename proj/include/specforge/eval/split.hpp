#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

namespace specforge::eval {

struct SplitPlan {
  std::size_t n_train_per_class = 8;
  std::size_t n_val_per_class = 8;
  std::size_t n_test_per_class = 16;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train, val, test;
};

// Exact per-class stratification; splits are disjoint and deterministic per
// seed. Throws InsufficientSamples naming the class that cannot be filled.
inline SplitPlan stratified_split(const std::vector<int>& class_ids, SplitPlan plan,
                                  const std::vector<std::string>& class_names = {}) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < class_ids.size(); ++i) by_class[class_ids[i]].push_back(i);
  const std::size_t need = plan.n_train_per_class + plan.n_val_per_class + plan.n_test_per_class;
  plan.train.clear();
  plan.val.clear();
  plan.test.clear();
  for (auto& [cls, members] : by_class) {
    if (members.size() < need) {
      const std::string name = cls >= 0 && static_cast<std::size_t>(cls) < class_names.size()
                                   ? class_names[static_cast<std::size_t>(cls)]
                                   : std::to_string(cls);
      throw InsufficientSamples("class " + name + " has " + std::to_string(members.size()) +
                                " samples, needs " + std::to_string(need));
    }
    Rng rng(mix_seed(plan.seed, 0xC1A55, static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    std::size_t k = 0;
    for (std::size_t i = 0; i < plan.n_train_per_class; ++i) plan.train.push_back(members[k++]);
    for (std::size_t i = 0; i < plan.n_val_per_class; ++i) plan.val.push_back(members[k++]);
    for (std::size_t i = 0; i < plan.n_test_per_class; ++i) plan.test.push_back(members[k++]);
  }
  return plan;
}

}  // namespace specforge::eval
