#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bpdq::app {

struct SuiteResult {
  std::string name;
  int passed = 0;
  int total = 0;
  std::vector<std::string> failures;  // first few failing cases

  bool ok() const noexcept { return passed == total; }
};

struct TheoryOptions {
  std::uint64_t seed = 0;
  std::optional<std::size_t> g;  // overrides each suite's group size(s)
  bool flip_tie_rule = false;    // test hook: column choice keeps the last tie
};

/// Suite names in run order.
const std::vector<std::string>& theory_suite_names();

/// Runs one named suite. Throws Error(kConfig) for an unknown name.
SuiteResult run_theory_suite(const std::string& name, const TheoryOptions& opts);

}  // namespace bpdq::app
