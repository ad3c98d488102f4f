// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "ssc/error.hpp"

namespace ssc::harness {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

void write_csv(std::ostream& os, std::span<const CsvRow> rows) {
  os << "variant,group,key,metric,value\n";
  for (const auto& r : rows) os << r.variant << ',' << r.group << ',' << r.key << ',' << r.metric << ',' << r.value << '\n';
}

void write_csv(const std::filesystem::path& path, std::span<const CsvRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write_csv(os, rows);
  if (!os) throw Error("failed writing " + path.string());
}

const std::vector<std::string>& tag_names() {
  static const std::vector<std::string> names = {"size", "frequency", "interaction", "relevant_context"};
  return names;
}

std::string tag_value(const synth::Tags& tags, const std::string& tag) {
  if (tag == "size") return tags.small ? "small" : "large";
  if (tag == "frequency") return tags.rare ? "rare" : "frequent";
  if (tag == "interaction") return tags.interaction ? "yes" : "no";
  if (tag == "relevant_context") return tags.relevant_context;
  throw Error("unknown tag '" + tag + "'");
}

std::vector<std::string> tag_values(const std::string& tag, std::span<const std::string> sources) {
  if (tag == "size") return {"small", "large"};
  if (tag == "frequency") return {"rare", "frequent"};
  if (tag == "interaction") return {"yes", "no"};
  if (tag == "relevant_context") return {sources.begin(), sources.end()};
  throw Error("unknown tag '" + tag + "'");
}

namespace {

struct CellMap {
  std::optional<double> map;
  std::size_t images = 0;
};

CellMap cell_map(const EvalReport& r, const std::string& tag, const std::string& value) {
  CellMap c;
  double total = 0.0;
  for (const auto& img : r.images) {
    if (!img.ap || tag_value(img.tags, tag) != value) continue;
    total += *img.ap;
    ++c.images;
  }
  if (c.images) c.map = total / static_cast<double>(c.images);
  return c;
}

std::vector<std::string> report_sources(const EvalReport& r) {
  if (!r.sources.empty()) return r.sources;
  return synth::source_names();
}

}  // namespace

Marginals marginalize_report(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error("marginalize_report: no reports");
  for (const auto& r : reports) {
    if (r.images.size() != reports[0].images.size()) throw Error("marginalize_report: reports cover different images");
    for (std::size_t i = 0; i < r.images.size(); ++i)
      if (r.images[i].id != reports[0].images[i].id) throw Error("marginalize_report: reports cover different images");
  }
  Marginals m;
  for (const auto& r : reports) m.variants.push_back(r.variant);
  const auto sources = report_sources(reports[0]);
  for (const auto& tag : tag_names()) {
    for (const auto& value : tag_values(tag, sources)) {
      TagCell cell{tag, value, {}, {}, {}};
      for (const auto& r : reports) {
        auto c = cell_map(r, tag, value);
        cell.map.push_back(c.map);
        cell.images.push_back(c.images);
      }
      for (const auto& v : cell.map) {
        if (v && cell.map[0]) cell.delta.push_back(*v - *cell.map[0]);
        else cell.delta.push_back(std::nullopt);
      }
      m.cells.push_back(std::move(cell));
    }
  }
  return m;
}

std::vector<std::optional<std::vector<double>>> selection_report(const EvalReport& report, std::size_t categories) {
  std::vector<std::optional<std::vector<double>>> out(categories);
  std::vector<std::size_t> counts(categories, 0);
  const auto m = report.sources.size();
  for (const auto& img : report.images) {
    if (img.alpha.empty() || m == 0) continue;
    if (img.labels.size() != categories || img.winners.size() != categories) {
      throw ShapeError("selection_report: image results do not match the category count");
    }
    for (std::size_t c = 0; c < categories; ++c) {
      if (!img.labels[c]) continue;
      const auto row = img.winners[c];
      if ((row + 1) * m > img.alpha.size()) throw ShapeError("selection_report: winner outside the gate");
      if (!out[c]) out[c] = std::vector<double>(m, 0.0);
      for (std::size_t s = 0; s < m; ++s) (*out[c])[s] += img.alpha[row * m + s];
      ++counts[c];
    }
  }
  for (std::size_t c = 0; c < categories; ++c)
    if (out[c])
      for (auto& v : *out[c]) v /= static_cast<double>(counts[c]);
  return out;
}

std::vector<CsvRow> eval_rows(const EvalReport& report, std::size_t categories) {
  const std::string v(to_string(report.variant));
  std::vector<CsvRow> rows;
  rows.push_back({v, "overall", "all", "map", format_number(report.map)});
  rows.push_back({v, "overall", "all", "scored_images", std::to_string(report.scored)});
  rows.push_back({v, "overall", "all", "excluded_images", std::to_string(report.excluded)});
  rows.push_back({v, "params", "total", "count", std::to_string(report.parameters)});
  const auto m = marginalize_report(std::span<const EvalReport>(&report, 1));
  for (const auto& cell : m.cells) {
    const auto group = "tag:" + cell.tag;
    rows.push_back({v, group, cell.value, "map", cell.map[0] ? format_number(*cell.map[0]) : "absent"});
    rows.push_back({v, group, cell.value, "images", std::to_string(cell.images[0])});
  }
  const auto sel = selection_report(report, categories);
  for (std::size_t c = 0; c < sel.size(); ++c) {
    if (!sel[c]) continue;
    for (std::size_t s = 0; s < report.sources.size(); ++s) {
      rows.push_back({v, "selection:" + std::to_string(c), report.sources[s], "mean_alpha", format_number((*sel[c])[s])});
    }
  }
  return rows;
}

std::vector<CsvRow> marginal_rows(const Marginals& m) {
  std::vector<CsvRow> rows;
  const std::string base(to_string(m.variants.at(0)));
  for (const auto& cell : m.cells) {
    const auto group = "tag:" + cell.tag;
    for (std::size_t i = 0; i < m.variants.size(); ++i) {
      const std::string v(to_string(m.variants[i]));
      rows.push_back({v, group, cell.value, "map", cell.map[i] ? format_number(*cell.map[i]) : "absent"});
      rows.push_back({v, group, cell.value, "images", std::to_string(cell.images[i])});
      if (i > 0) {
        rows.push_back({v, group, cell.value, "delta_vs_" + base, cell.delta[i] ? format_number(*cell.delta[i]) : "absent"});
      }
    }
  }
  return rows;
}

std::vector<CsvRow> param_rows(Variant variant, const ParamCount& count) {
  const std::string v(to_string(variant));
  std::vector<CsvRow> rows;
  auto emit = [&](const std::string& group, const std::string& key, const KindCounts& k) {
    rows.push_back({v, group, key, "weights", std::to_string(k.weights)});
    rows.push_back({v, group, key, "biases", std::to_string(k.biases)});
    rows.push_back({v, group, key, "bn_affine", std::to_string(k.bn_affine)});
    rows.push_back({v, group, key, "bn_running", std::to_string(k.bn_running)});
    rows.push_back({v, group, key, "query", std::to_string(k.query)});
    rows.push_back({v, group, key, "total", std::to_string(k.total())});
  };
  for (const auto& mc : count.modules) emit("module", mc.module, mc.counts);
  emit("overall", "all", count.totals);
  return rows;
}

}  // namespace ssc::harness
