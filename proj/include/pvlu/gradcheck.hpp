// Copyright 2026 The PVLU Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pvlu {

struct GradcheckOptions {
  /// Minimum number of compared gradient entries per case.
  std::size_t points = 1000;
  double h = 1e-5;
  double tolerance = 1e-4;
  /// Pre-activations closer than this to 0 are not sampled.
  double kink_margin = 1e-3;
  std::uint64_t seed = 0;
};

struct GradcheckCase {
  std::string name;
  std::size_t samples = 0;
  double max_rel_err = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  GradcheckOptions options;

  bool passed() const;
  std::vector<std::string> failing() const;
};

/// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

/// Analytic vs central-difference gradients for every activation kind (input
/// and parameter gradients), the primitive ops, a two-layer dense net and
/// every parameter of small two-conv CNNs.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

void print_report(const GradcheckReport& report, std::ostream& out);

}  // namespace pvlu
