#pragma once

#include <functional>
#include <string>
#include <vector>

namespace hessfit {

struct CriterionResult {
  int number = 0;
  std::string name;
  bool pass = false;
  std::string detail;

  std::string line() const;
};

// Runs acceptance criterion `number` (1..10).
CriterionResult run_criterion(int number);

// Runs all criteria in order, invoking `on_done` after each; returns all
// results.
std::vector<CriterionResult> run_acceptance(
    const std::function<void(const CriterionResult&)>& on_done = {});

}  // namespace hessfit
