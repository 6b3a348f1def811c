#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spdl/optimizer.hpp"

namespace spdl {

struct VerifyReport {
  std::string suite;
  long cases = 0;
  long failures = 0;
  double max_deviation = 0.0;
  std::vector<std::string> notes;  // first failures, human readable

  [[nodiscard]] bool ok() const { return cases > 0 && failures == 0; }
};

/// Small seeded optimizer context (1 s steps, default bounds).
OptimizerContext small_dp_context(std::uint64_t seed);

/// Exhaustive search over (x1, x2) and every phase plan, stage by stage.
CycleSolution brute_force_cycle(const OptimizerContext& ctx);

VerifyReport verify_dp_oracle(int contexts = 50, std::uint64_t seed = 1);
VerifyReport verify_trajectory_oracle(int instances = 100, std::uint64_t seed = 1);
VerifyReport verify_queue_conservation(int cases = 100, std::uint64_t seed = 1);
VerifyReport verify_appendix_a_bounds(int samples = 1000, std::uint64_t seed = 1);

const std::vector<std::string>& verify_suite_names();
/// Throws std::invalid_argument for an unknown suite.
VerifyReport run_verify_suite(const std::string& name, std::uint64_t seed = 1);

void write_report(std::ostream& os, const VerifyReport& r);

}  // namespace spdl
