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

#include <filesystem>
#include <string>
#include <vector>

#include "pvlu/harness.hpp"

namespace pvlu {

inline constexpr const char* kTrialCsvHeader = "epoch,train_loss,train_acc,test_loss,test_acc,dead_frac";
inline constexpr const char* kSummaryCsvHeader = "activation,mean_peak,std_err,n";

/// printf %.6g, so output is stable across runs and platforms.
std::string format_number(double v);

std::string trial_csv(const std::vector<EpochMetrics>& rows);
std::string summary_csv(const std::vector<Summary>& rows);

/// Parses a trial CSV. Throws FormatError on a wrong header, a malformed row
/// or a file without data rows.
std::vector<EpochMetrics> parse_trial_csv(const std::string& text);
std::vector<EpochMetrics> read_trial_csv(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<EpochMetrics> rows;
};

/// Test accuracy vs epoch, one polyline and one legend entry per series.
std::string accuracy_svg(const std::vector<PlotSeries>& series, const std::string& title);

}  // namespace pvlu
