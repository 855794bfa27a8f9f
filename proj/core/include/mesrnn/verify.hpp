// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mesrnn::verify {

struct VerifyOptions {
  double tolerance = 1e-4;
  double step = 1e-6;
  /// Varies the random tensors, scenes and sampled entries.
  std::uint64_t seed = 0;
  std::size_t oracle_scenes = 100;
  /// Entries sampled per tensor for the full-size networks; primitives
  /// always check every entry.
  std::size_t sampled_entries = 12;
};

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  /// Worst relative error for gradient checks, mismatch count otherwise.
  double measure = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  void append(const VerifyReport& other);
};

/// Every tape primitive, each EdgeRNN kind, the NodeRNN, the VLSTM and the
/// full MESRNN on 2 pedestrians over 4 teacher-forced steps.
VerifyReport gradient_checks(const VerifyOptions& options);
/// metapaths() against enumerate_walks_oracle() on random scenes (up to 6
/// pedestrians and 6 steps, random presence), exact multiset equality.
VerifyReport oracle_checks(const VerifyOptions& options);
/// Instance counts on fully present scenes with 2, 3, 5 and 8 pedestrians.
VerifyReport counting_checks(const VerifyOptions& options);

VerifyReport run_all(const VerifyOptions& options);

void write_table(std::ostream& out, const VerifyReport& report);

}  // namespace mesrnn::verify
