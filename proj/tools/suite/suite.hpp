#pragma once

#include <functional>
#include <string>
#include <vector>

namespace qs::suite {

struct Options {
  bool quick = false;             // correctness criteria only
  bool break_coalescing = false;  // negative control: the "all" arm runs without coalescing
  std::string corpus_dir;
  unsigned threads = 0;  // 0: hardware concurrency
  unsigned repetitions = 20;
  std::vector<std::string> only;  // criterion ids; empty runs all
};

/// Ids of every criterion, in run order.
std::vector<std::string> criterion_ids();

enum class Outcome { kPass, kFail, kNotApplicable, kSkipped };

struct CriterionResult {
  std::string id;
  Outcome outcome = Outcome::kFail;
  double seconds = 0;
  double limit = 0;  // seconds
  std::string detail;
};

/// Runs every acceptance criterion in order, reporting each as it finishes.
std::vector<CriterionResult> run_suite(const Options& opts,
                                       const std::function<void(const CriterionResult&)>& sink = {});

std::string format(const CriterionResult& r);
/// Nothing failed. Skipped and not-applicable criteria do not count as failures.
bool passed(const std::vector<CriterionResult>& results);
std::string summary(const std::vector<CriterionResult>& results);

}  // namespace qs::suite
