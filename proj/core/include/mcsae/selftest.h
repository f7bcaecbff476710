// Copyright (c) 2026 MCSAE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MCSAE_SELFTEST_H_
#define MCSAE_SELFTEST_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace mcsae {

struct SelftestResult {
  std::string suite;
  bool passed = false;
  std::string detail;  // first failed check, empty when the suite passed
};

// Runs every invariant suite: gradient checks on the core ops, attention
// algebra, masking behavior, full-scale layer shapes, frontend math,
// optimizer mechanics, and the metric oracles. Deterministic.
std::vector<SelftestResult> RunSelftest();

// Prints one "suite: pass|FAIL" line per suite and returns the failure
// count.
size_t RunSelftestReport(std::ostream& os);

}  // namespace mcsae

#endif  // MCSAE_SELFTEST_H_
