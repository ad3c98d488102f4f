// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssc/harness/experiment.hpp"
#include "ssc/harness/params.hpp"

namespace ssc::harness {

/// Fixed-point, ten decimals.
std::string format_number(double v);

struct CsvRow {
  std::string variant;
  std::string group;
  std::string key;
  std::string metric;
  std::string value;
};

void write_csv(std::ostream& os, std::span<const CsvRow> rows);
void write_csv(const std::filesystem::path& path, std::span<const CsvRow> rows);

/// Tag names carried by every synthetic image.
const std::vector<std::string>& tag_names();
std::string tag_value(const synth::Tags& tags, const std::string& tag);
/// Values of a tag in reporting order.
std::vector<std::string> tag_values(const std::string& tag, std::span<const std::string> sources);

struct TagCell {
  std::string tag;
  std::string value;
  std::vector<std::optional<double>> map;  // per variant; absent when the cell scores no image
  std::vector<std::size_t> images;         // scored images per variant
  std::vector<std::optional<double>> delta;  // per variant, minus the first variant
};

struct Marginals {
  std::vector<Variant> variants;
  std::vector<TagCell> cells;
};

/// Per-tag mAP for each report and deltas against reports[0]. All reports
/// must cover the same images.
Marginals marginalize_report(std::span<const EvalReport> reports);

/// Row c: mean over images positive for c of the gate row of the pair that
/// won category c. Absent for categories without positives or for
/// ungated variants.
std::vector<std::optional<std::vector<double>>> selection_report(const EvalReport& report, std::size_t categories);

std::vector<CsvRow> eval_rows(const EvalReport& report, std::size_t categories);
std::vector<CsvRow> marginal_rows(const Marginals& m);
std::vector<CsvRow> param_rows(Variant variant, const ParamCount& count);

}  // namespace ssc::harness
