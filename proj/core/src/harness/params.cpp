// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/harness/params.hpp"

namespace ssc::harness {

KindCounts& KindCounts::operator+=(const KindCounts& o) {
  weights += o.weights;
  biases += o.biases;
  bn_affine += o.bn_affine;
  bn_running += o.bn_running;
  query += o.query;
  return *this;
}

KindCounts ParamCount::module(const std::string& name) const {
  for (const auto& m : modules)
    if (m.module == name) return m.counts;
  return {};
}

ParamCount param_count(const Model& model) {
  ParamCount out;
  for (const auto& p : model.parameters().entries()) {
    const auto group = p.group();
    if (out.modules.empty() || out.modules.back().module != group) out.modules.push_back({group, {}});
    KindCounts k;
    const auto n = p.tensor.size();
    switch (p.kind) {
      case num::ParamKind::weight: k.weights = n; break;
      case num::ParamKind::bias: k.biases = n; break;
      case num::ParamKind::bn_affine: k.bn_affine = n; break;
      case num::ParamKind::bn_running: k.bn_running = n; break;
      case num::ParamKind::query: k.query = n; break;
    }
    out.modules.back().counts += k;
    out.totals += k;
  }
  return out;
}

ParamCount param_count(const ModelConfig& config) { return param_count(Model(config, 0)); }

}  // namespace ssc::harness
