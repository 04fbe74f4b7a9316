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

#include "pvlu/metrics_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pvlu/errors.hpp"

namespace pvlu {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string trial_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = std::string(kTrialCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + format_number(r.train_loss) + "," + format_number(r.train_acc) + "," +
           format_number(r.test_loss) + "," + format_number(r.test_acc) + "," + format_number(r.dead_frac) + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<Summary>& rows) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& s : rows) {
    out += s.activation + "," + format_number(s.mean_peak) + "," + format_number(s.std_err) + "," +
           std::to_string(s.n) + "\n";
  }
  return out;
}

std::vector<EpochMetrics> parse_trial_csv(const std::string& text) {
  std::vector<EpochMetrics> rows;
  std::stringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line)) throw FormatError("trial csv: empty file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrialCsvHeader) throw FormatError("trial csv: expected header '" + std::string(kTrialCsvHeader) + "'", 0);
  offset += line.size() + 1;
  while (std::getline(in, line)) {
    const std::size_t row_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6) throw FormatError("trial csv: expected 6 columns", row_offset);
    std::array<double, 6> v{};
    for (std::size_t i = 0; i < 6; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
      } catch (const std::exception&) {
        throw FormatError("trial csv: bad number '" + cells[i] + "'", row_offset);
      }
    }
    if (v[0] < 0 || v[0] != std::floor(v[0])) throw FormatError("trial csv: bad epoch", row_offset);
    rows.push_back({static_cast<std::size_t>(v[0]), v[1], v[2], v[3], v[4], v[5]});
  }
  if (rows.empty()) throw FormatError("trial csv: no data rows", offset);
  return rows;
}

std::vector<EpochMetrics> read_trial_csv(const std::filesystem::path& path) {
  try {
    return parse_trial_csv(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string accuracy_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  if (series.empty()) throw ContractError("plot: no series");
  constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 60;
  const double pw = W - L - R, ph = H - T - B;

  std::size_t min_epoch = SIZE_MAX, max_epoch = 0;
  double lo = 1.0, hi = 0.0;
  for (const auto& s : series) {
    if (s.rows.empty()) throw ContractError("plot: series '" + s.label + "' is empty");
    for (const auto& r : s.rows) {
      min_epoch = std::min(min_epoch, r.epoch);
      max_epoch = std::max(max_epoch, r.epoch);
      lo = std::min(lo, r.test_acc);
      hi = std::max(hi, r.test_acc);
    }
  }
  // Round the accuracy range outwards to tenths.
  lo = std::max(0.0, std::floor(lo * 10.0) / 10.0);
  hi = std::min(1.0, std::ceil(hi * 10.0) / 10.0);
  if (hi <= lo) hi = std::min(1.0, lo + 0.1), lo = hi - 0.1;
  const double span_e = max_epoch > min_epoch ? static_cast<double>(max_epoch - min_epoch) : 1.0;
  auto x_of = [&](double e) { return L + (e - static_cast<double>(min_epoch)) / span_e * pw; };
  auto y_of = [&](double a) { return T + (1.0 - (a - lo) / (hi - lo)) * ph; };
  auto num = [](double v) { return format_number(std::round(v * 100.0) / 100.0); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
      << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
  out << "<g stroke=\"#ccc\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double a = lo + (hi - lo) * i / 5.0;
    out << "<line x1=\"" << L << "\" y1=\"" << num(y_of(a)) << "\" x2=\"" << L + pw << "\" y2=\"" << num(y_of(a))
        << "\"/>\n";
  }
  out << "</g>\n";
  out << "<g stroke=\"black\">\n<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\""
      << T + ph << "\"/>\n<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph
      << "\"/>\n</g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double a = lo + (hi - lo) * i / 5.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << num(y_of(a) + 4) << "\" text-anchor=\"end\">" << format_number(a)
        << "</text>\n";
  }
  const std::size_t step = std::max<std::size_t>(1, (max_epoch - min_epoch + 9) / 10);
  for (std::size_t e = min_epoch; e <= max_epoch; e += step) {
    out << "<text x=\"" << num(x_of(static_cast<double>(e))) << "\" y=\"" << T + ph + 18
        << "\" text-anchor=\"middle\">" << e << "</text>\n";
  }
  out << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">epoch</text>\n";
  out << "<text x=\"18\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << T + ph / 2
      << ")\">test accuracy</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* colour = kPalette[i % kPalette.size()];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < series[i].rows.size(); ++j) {
      const auto& r = series[i].rows[j];
      out << (j ? " " : "") << num(x_of(static_cast<double>(r.epoch))) << "," << num(y_of(r.test_acc));
    }
    out << "\"/>\n";
  }
  out << "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = T + 10 + 20.0 * static_cast<double>(i);
    out << "<g class=\"legend-entry\"><line x1=\"" << L + pw + 15 << "\" y1=\"" << y << "\" x2=\"" << L + pw + 35
        << "\" y2=\"" << y << "\" stroke=\"" << kPalette[i % kPalette.size()] << "\" stroke-width=\"2\"/><text x=\""
        << L + pw + 40 << "\" y=\"" << y + 4 << "\">" << xml_escape(series[i].label) << "</text></g>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace pvlu
