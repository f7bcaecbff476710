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

#ifndef MCSAE_EVALUATION_H_
#define MCSAE_EVALUATION_H_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcsae {

// One verification trial: is the test utterance the enrolled speaker?
struct Trial {
  bool target = false;
  std::string enroll;
  std::string test;
};

// Whitespace-separated "label enroll test" lines, label 1 (target) or
// 0 (nontarget). Blank lines are skipped; anything else is a parse error
// naming the line number.
std::vector<Trial> ParseTrials(std::istream& is, const std::string& context);
std::vector<Trial> LoadTrials(const std::string& path);

// a.b / (|a| |b|). Equal dims required; a zero-norm side is a scoring
// error.
double CosineScore(const std::vector<double>& a, const std::vector<double>& b);

// Parallel scores and labels (1 target, 0 nontarget).
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

struct MetricResult {
  double value = 0.0;
  double threshold = 0.0;
};

// Sweeps every decision region the score set induces: FAR(t) is the
// fraction of nontargets >= t, FRR(t) the fraction of targets < t. Returns
// (FAR+FRR)/2 where |FAR-FRR| is smallest, ties broken toward the lower
// threshold. Needs at least one score in each class.
MetricResult ComputeEer(const ScoreSet& s);

// Detection cost c_miss*FRR*p_target + c_fa*FAR*(1-p_target) over the same
// sweep, normalized by the cost of the better blind decision; the minimum
// never exceeds 1.
MetricResult ComputeMinDcf(const ScoreSet& s, double p_target = 0.01,
                           double c_miss = 1.0, double c_fa = 1.0);

// Score file: one line per trial, "label score enroll test", full double
// precision.
struct ScoredTrial {
  int label = 0;
  double score = 0.0;
  std::string enroll;
  std::string test;
};

void WriteScores(std::ostream& os, const std::vector<ScoredTrial>& rows);
std::vector<ScoredTrial> ReadScores(std::istream& is,
                                    const std::string& context);
void SaveScores(const std::string& path, const std::vector<ScoredTrial>& rows);
std::vector<ScoredTrial> LoadScores(const std::string& path);

ScoreSet ToScoreSet(const std::vector<ScoredTrial>& rows);

}  // namespace mcsae

#endif  // MCSAE_EVALUATION_H_
