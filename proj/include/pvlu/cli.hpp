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

#include <ostream>
#include <string>
#include <vector>

namespace pvlu::cli {

enum ExitCode : int {
  kSuccess = 0,
  kVerificationFailed = 1,
  kConfigError = 2,
  kNumericAbort = 3,
};

/// Entry point behind the `pvlu` binary. `args` excludes the program name.
///
///   train     --config FILE [--seed S] [--epochs E] [--jobs N] [--out DIR]
///   compare   --config FILE [--seed S] [--epochs E] [--jobs N] [--out DIR]
///   finetune  --config FILE --checkpoint FILE [--seed S] [--epochs E] [--out DIR]
///   gradcheck [--points N] [--seed S]
///   plot      CSV... --out FILE.svg [--title TEXT]
///   fixtures  --out DIR [--seed S] [--small]
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pvlu::cli
