// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ssc/error.hpp"
#include "ssc/numerics/random.hpp"

namespace ssc::synth {

namespace {

constexpr std::uint64_t kPrototypeStream = 0x70726f746fULL;
constexpr std::uint64_t kImageStream = 0x696d616765ULL;
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr const char* kMagic = "ssc-dataset";
constexpr int kFormatVersion = 1;

// Payload values live on a 1e-4 grid so their shortest decimal form is
// short and round-trips exactly.
double quantize(double x) { return std::round(x * 1e4) / 1e4; }

}  // namespace

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::string_view to_string(Relevance r) { return r == Relevance::category ? "category" : "pair"; }

const std::vector<std::string>& source_names() {
  static const std::vector<std::string> names = {ctx::kBodyPartSource, ctx::kStuffSource, ctx::kSurroundSource,
                                                 ctx::kDeformationSource};
  return names;
}

GenConfig GenConfig::benchmark() {
  GenConfig c;
  c.num_images = 2500;
  c.categories = 9;
  c.pairs = 12;
  c.pair_dim = 32;
  c.part_dim = 16;
  c.map_depth = 32;
  c.map_height = 6;
  c.map_width = 6;
  c.deformation_dim = 32;
  return c;
}

GenConfig GenConfig::shifted_benchmark() {
  auto c = benchmark();
  c.pair_signal = 2.0;
  c.shift_fraction = 0.5;
  c.shift_scale = 4.0;
  c.clutter_fraction = 0.25;
  return c;
}

GenConfig GenConfig::pair_benchmark() {
  auto c = benchmark();
  c.relevance = Relevance::pair;
  c.pair_signal = 2.0;
  c.distractor_signal = 1.0;
  c.clutter_fraction = 1.0;
  return c;
}

GenConfig GenConfig::planted_benchmark() {
  auto c = benchmark();
  c.categories = 4;
  c.no_interaction_fraction = 0.0;
  c.rare_fraction = 0.0;
  c.signal_to_noise = 4.0;
  c.pair_signal = 2.0;
  return c;
}

std::size_t GenConfig::interaction_categories() const {
  return no_interaction_fraction > 0.0 ? categories - 1 : categories;
}

std::size_t GenConfig::rare_categories() const {
  if (rare_fraction <= 0.0) return 0;
  return std::max<std::size_t>(1, interaction_categories() / 4);
}

std::size_t GenConfig::no_interaction_category() const {
  return no_interaction_fraction > 0.0 ? categories - 1 : categories;
}

std::vector<std::string> GenConfig::violations() const {
  std::vector<std::string> out;
  auto need = [&](bool ok, const char* what) {
    if (!ok) out.emplace_back(what);
  };
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  need(num_images > 0, "num_images must be positive");
  need(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must be in (0, 1)");
  need(categories >= 2, "categories must be at least 2");
  need(pairs >= 1, "pairs must be at least 1");
  need(pair_dim > 0 && part_dim > 0 && map_depth > 0 && deformation_dim > 0, "feature dimensions must be positive");
  need(map_height > 0 && map_width > 0, "map extents must be positive");
  need(segments >= 1, "segments must be at least 1");
  need(map_height * map_width >= segments + std::max<std::size_t>(1, map_height * map_width / 4),
       "map too small for the segments plus a background of a quarter of the pixels");
  need(signal_to_noise >= 0.0 && std::isfinite(signal_to_noise), "signal_to_noise must be finite and >= 0");
  need(pair_signal >= 0.0 && std::isfinite(pair_signal), "pair_signal must be finite and >= 0");
  need(pair_noise > 0.0 && std::isfinite(pair_noise), "pair_noise must be positive");
  need(distractor_signal >= 0.0 && std::isfinite(distractor_signal), "distractor_signal must be finite and >= 0");
  need(shift_scale > 0.0 && std::isfinite(shift_scale), "shift_scale must be positive");
  need(unit(shift_fraction), "shift_fraction must be in [0, 1]");
  need(unit(clutter_fraction), "clutter_fraction must be in [0, 1]");
  need(unit(rare_fraction), "rare_fraction must be in [0, 1]");
  need(no_interaction_fraction >= 0.0 && no_interaction_fraction < 1.0, "no_interaction_fraction must be in [0, 1)");
  need(rare_fraction < 1.0 || interaction_categories() >= 1, "rare_fraction needs interaction categories");
  need(interaction_categories() >= 2 || rare_fraction == 0.0, "rare categories need at least 2 interaction categories");
  return out;
}

void GenConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid generator config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ConfigError(msg);
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void GenConfig::set(std::string_view key, std::string_view value) {
  auto sz = [&](std::size_t& f) { f = parse_number<std::size_t>(key, value); };
  auto dbl = [&](double& f) { f = parse_number<double>(key, value); };
  if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "num_images") sz(num_images);
  else if (key == "test_fraction") dbl(test_fraction);
  else if (key == "categories") sz(categories);
  else if (key == "pairs") sz(pairs);
  else if (key == "pair_dim") sz(pair_dim);
  else if (key == "part_dim") sz(part_dim);
  else if (key == "map_depth") sz(map_depth);
  else if (key == "map_height") sz(map_height);
  else if (key == "map_width") sz(map_width);
  else if (key == "segments") sz(segments);
  else if (key == "deformation_dim") sz(deformation_dim);
  else if (key == "signal_to_noise") dbl(signal_to_noise);
  else if (key == "pair_signal") dbl(pair_signal);
  else if (key == "pair_noise") dbl(pair_noise);
  else if (key == "distractor_signal") dbl(distractor_signal);
  else if (key == "shift_fraction") dbl(shift_fraction);
  else if (key == "shift_scale") dbl(shift_scale);
  else if (key == "clutter_fraction") dbl(clutter_fraction);
  else if (key == "rare_fraction") dbl(rare_fraction);
  else if (key == "no_interaction_fraction") dbl(no_interaction_fraction);
  else if (key == "relevance") {
    if (value == "category") relevance = Relevance::category;
    else if (value == "pair") relevance = Relevance::pair;
    else throw ConfigError("relevance must be 'category' or 'pair', got '" + std::string(value) + "'");
  } else {
    throw ConfigError("unknown generator setting '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> GenConfig::fields() const {
  auto s = [](auto v) { return std::to_string(v); };
  return {{"seed", s(seed)},
          {"num_images", s(num_images)},
          {"test_fraction", format_double(test_fraction)},
          {"categories", s(categories)},
          {"pairs", s(pairs)},
          {"pair_dim", s(pair_dim)},
          {"part_dim", s(part_dim)},
          {"map_depth", s(map_depth)},
          {"map_height", s(map_height)},
          {"map_width", s(map_width)},
          {"segments", s(segments)},
          {"deformation_dim", s(deformation_dim)},
          {"signal_to_noise", format_double(signal_to_noise)},
          {"pair_signal", format_double(pair_signal)},
          {"pair_noise", format_double(pair_noise)},
          {"distractor_signal", format_double(distractor_signal)},
          {"shift_fraction", format_double(shift_fraction)},
          {"shift_scale", format_double(shift_scale)},
          {"clutter_fraction", format_double(clutter_fraction)},
          {"rare_fraction", format_double(rare_fraction)},
          {"no_interaction_fraction", format_double(no_interaction_fraction)},
          {"relevance", std::string(to_string(relevance))}};
}

GenConfig GenConfig::from_kv_file(const std::filesystem::path& path, GenConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw FormatError("expected key = value", lineno);
    try {
      base.set(trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw FormatError(e.what(), lineno);
    }
  }
  return base;
}

std::size_t SynImage::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::vector<const SynImage*> SynDataset::split(Split s) const {
  std::vector<const SynImage*> out;
  for (const auto& img : images)
    if (img.split == s) out.push_back(&img);
  return out;
}

Split split_of(std::uint64_t seed, std::size_t id, double test_fraction) {
  num::Rng rng(num::sub_seed(seed ^ kSplitStream, id));
  return rng.uniform() < test_fraction ? Split::test : Split::train;
}

namespace {

std::vector<double> prototype(num::Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  const double s = std::sqrt(static_cast<double>(dim) / norm);
  for (auto& x : v) x *= s;
  return v;
}

struct Prototypes {
  std::vector<std::vector<double>> pair;       // per category, D_ho
  std::vector<std::vector<double>> signature;  // per source, D_ho
  std::vector<std::vector<double>> part;       // per category, d_p
  std::vector<double> salient;                 // d_p
  std::vector<std::vector<double>> stuff;      // per category, D
  std::vector<std::vector<double>> surround;   // per category, D
  std::vector<std::vector<double>> deformation;
};

Prototypes make_prototypes(const GenConfig& c) {
  num::Rng rng(num::sub_seed(c.seed, kPrototypeStream));
  Prototypes p;
  const auto sources = source_names().size();
  for (std::size_t k = 0; k < c.categories; ++k) p.pair.push_back(prototype(rng, c.pair_dim));
  for (std::size_t k = 0; k < sources; ++k) p.signature.push_back(prototype(rng, c.pair_dim));
  for (std::size_t k = 0; k < c.categories; ++k) p.part.push_back(prototype(rng, c.part_dim));
  p.salient = prototype(rng, c.part_dim);
  for (std::size_t k = 0; k < c.categories; ++k) p.stuff.push_back(prototype(rng, c.map_depth));
  for (std::size_t k = 0; k < c.categories; ++k) p.surround.push_back(prototype(rng, c.map_depth));
  for (std::size_t k = 0; k < c.categories; ++k) p.deformation.push_back(prototype(rng, c.deformation_dim));
  return p;
}

void add_scaled(double* dst, const std::vector<double>& v, double s) {
  for (std::size_t i = 0; i < v.size(); ++i) dst[i] += s * v[i];
}

// Random partition of the pixels into K segments plus a background holding
// at least a quarter of the pixels. Masks come out sorted by area.
ctx::SegmentMasks make_segments(const GenConfig& c, num::Rng& rng, std::vector<std::uint8_t>& background) {
  const std::size_t pixels = c.map_height * c.map_width;
  const std::size_t k = c.segments;
  const std::size_t min_background = std::max<std::size_t>(1, pixels / 4);
  std::vector<std::size_t> order(pixels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = pixels; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  std::vector<std::size_t> owner(pixels, k);  // k == background
  for (std::size_t i = 0; i < k; ++i) owner[order[i]] = i;
  for (std::size_t i = k + min_background; i < pixels; ++i) {
    const auto pick = rng.index(k + 1);
    owner[order[i]] = pick;
  }
  ctx::SegmentMasks masks;
  masks.height = c.map_height;
  masks.width = c.map_width;
  masks.masks.assign(k, std::vector<std::uint8_t>(pixels, 0));
  background.assign(pixels, 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (owner[p] == k) {
      background[p] = 1;
    } else {
      masks.masks[owner[p]][p] = 1;
    }
  }
  auto areas = masks.areas();
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });
  std::vector<std::vector<std::uint8_t>> sorted;
  for (auto i : idx) sorted.push_back(std::move(masks.masks[i]));
  masks.masks = std::move(sorted);
  return masks;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

SynImage make_image(const GenConfig& c, const Prototypes& proto, std::size_t id) {
  num::Rng rng(num::sub_seed(c.seed, kImageStream + id));
  const auto m = source_names().size();
  SynImage img;
  img.id = id;
  img.split = split_of(c.seed, id, c.test_fraction);

  const auto interaction = c.interaction_categories();
  const auto rare = c.rare_categories();
  const bool draw_none = rng.bernoulli(c.no_interaction_fraction);
  const bool draw_rare = rng.bernoulli(c.rare_fraction);
  if (draw_none && c.no_interaction_category() < c.categories) {
    img.category = c.no_interaction_category();
  } else if (draw_rare && rare > 0) {
    img.category = rng.index(rare);
  } else {
    img.category = rare + rng.index(interaction - rare);
  }
  const auto cat = img.category;
  const bool shifted = rng.bernoulli(c.shift_fraction) && img.split == Split::test;
  const bool cluttered = rng.bernoulli(c.clutter_fraction);
  const bool misleading = shifted || cluttered;
  const std::size_t signature = c.relevance == Relevance::pair ? rng.index(m) : 0;
  const std::size_t relevant = (cat + signature) % m;
  const double area = rng.uniform(0.02, 0.6);

  img.labels.assign(c.categories, 0);
  img.labels[cat] = 1;
  img.tags.small = area < 0.2;
  img.tags.rare = cat < rare && cat < interaction;
  img.tags.interaction = cat != c.no_interaction_category();
  img.tags.relevant_context = source_names()[relevant];

  // Human-object pairs: one active, the rest noise or weak distractors. In
  // pair mode every pair also carries the code of the source it reads; the
  // active pair's code names the relevant source.
  const bool coded = c.relevance == Relevance::pair;
  img.active_pair = rng.index(c.pairs);
  img.pairs.assign(c.pairs * c.pair_dim, 0.0);
  std::vector<std::size_t> pair_class(c.pairs, kNone);
  std::vector<std::size_t> pair_code(c.pairs, relevant);
  for (std::size_t p = 0; p < c.pairs; ++p) {
    double* row = img.pairs.data() + p * c.pair_dim;
    for (std::size_t j = 0; j < c.pair_dim; ++j) row[j] = c.pair_noise * rng.normal();
    if (p == img.active_pair) {
      add_scaled(row, proto.pair[cat], c.pair_signal * (img.tags.small ? 0.6 : 1.0));
    } else {
      if (rng.bernoulli(0.5)) {
        pair_class[p] = (cat + 1 + rng.index(c.categories - 1)) % c.categories;
        add_scaled(row, proto.pair[pair_class[p]], c.distractor_signal * c.pair_signal);
      }
      pair_code[p] = rng.index(m);
    }
    if (coded) add_scaled(row, proto.signature[pair_code[p]], c.pair_signal);
  }

  // Which class each source shows, and how noisy it is. A decoy must look
  // in-distribution: in category mode it is a class for which this source
  // would be relevant; in pair mode it is the class of a distractor pair
  // whose code points elsewhere.
  std::vector<std::size_t> shows(m, kNone);
  std::vector<double> noise(m, 1.0);
  std::vector<std::size_t> candidates;
  for (std::size_t s = 0; s < m; ++s) {
    candidates.clear();
    if (coded) {
      for (std::size_t p = 0; p < c.pairs; ++p) {
        if (pair_class[p] == kNone || pair_code[p] == s) continue;
        bool read_here = false;
        for (std::size_t q = 0; q < c.pairs; ++q) read_here |= pair_code[q] == s && pair_class[q] == pair_class[p];
        if (!read_here) candidates.push_back(pair_class[p]);
      }
    } else {
      for (std::size_t d = 0; d < c.categories; ++d)
        if (d != cat && (d + signature) % m == s) candidates.push_back(d);
    }
    const auto decoy = candidates.empty() ? (cat + 1 + rng.index(c.categories - 1)) % c.categories
                                          : candidates[rng.index(candidates.size())];
    if (s == relevant) {
      shows[s] = cat;
    } else {
      if (misleading) shows[s] = decoy;
      if (shifted) noise[s] = c.shift_scale;
    }
  }
  const double snr = c.signal_to_noise;

  // Body parts: three random parts always carry a salient offset; the
  // signal, when shown, lands on the same three.
  auto& parts = img.contexts.parts;
  parts.dim = c.part_dim;
  parts.values.resize(ctx::kBodyParts * c.part_dim);
  for (auto& v : parts.values) v = noise[0] * rng.normal();
  {
    std::vector<std::size_t> order(ctx::kBodyParts);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < ctx::kSelectedParts; ++i) std::swap(order[i], order[i + rng.index(ctx::kBodyParts - i)]);
    for (std::size_t i = 0; i < ctx::kSelectedParts; ++i) {
      double* row = parts.values.data() + order[i] * c.part_dim;
      if (shows[0] != kNone) add_scaled(row, proto.part[shows[0]], snr);
      add_scaled(row, proto.salient, 1.0);
    }
  }

  // Global map: stuff signal sits in the background so it shows in the
  // spatial average but not under the masks; surround signal sits under
  // the masks and is cancelled in the average.
  std::vector<std::uint8_t> background;
  img.contexts.masks = make_segments(c, rng, background);
  auto& map = img.contexts.map;
  map.height = c.map_height;
  map.width = c.map_width;
  map.depth = c.map_depth;
  const std::size_t pixels = map.pixels();
  const auto bg_count = static_cast<double>(std::count(background.begin(), background.end(), 1));
  const double fg_count = static_cast<double>(pixels) - bg_count;
  map.values.resize(pixels * c.map_depth);
  for (std::size_t p = 0; p < pixels; ++p) {
    double* px = map.values.data() + p * c.map_depth;
    const double scale = background[p] ? noise[1] : noise[2];
    for (std::size_t j = 0; j < c.map_depth; ++j) px[j] = scale * rng.normal();
    if (background[p]) {
      if (shows[1] != kNone) add_scaled(px, proto.stuff[shows[1]], snr * static_cast<double>(pixels) / bg_count);
      if (shows[2] != kNone) add_scaled(px, proto.surround[shows[2]], -snr * fg_count / bg_count);
    } else if (shows[2] != kNone) {
      add_scaled(px, proto.surround[shows[2]], snr);
    }
  }

  ctx::ProviderPayload deformation{ctx::kDeformationSource, std::vector<double>(c.deformation_dim)};
  for (auto& v : deformation.values) v = noise[3] * rng.normal();
  if (shows[3] != kNone) add_scaled(deformation.values.data(), proto.deformation[shows[3]], snr);
  img.contexts.providers.push_back(std::move(deformation));

  for (auto& v : img.pairs) v = quantize(v);
  for (auto& v : parts.values) v = quantize(v);
  for (auto& v : map.values) v = quantize(v);
  for (auto& v : img.contexts.providers[0].values) v = quantize(v);
  return img;
}

}  // namespace

SynDataset gen_dataset(const GenConfig& config) {
  config.validate();
  SynDataset data;
  data.config = config;
  const auto proto = make_prototypes(config);
  data.images.reserve(config.num_images);
  for (std::size_t id = 0; id < config.num_images; ++id) data.images.push_back(make_image(config, proto, id));
  return data;
}

// ---------------------------------------------------------------------------
// Text format: one header record, then one record per image. Every record
// is a line of space-separated key=value fields.

namespace {

void append_values(std::string& out, std::span<const double> values) {
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values[i]);
    out.append(buf, ptr);
  }
}

std::string image_record(const SynImage& img, const GenConfig& c) {
  std::string out;
  out.reserve(16 * (img.pairs.size() + img.contexts.map.values.size()));
  out += "image id=" + std::to_string(img.id);
  out += " split=";
  out += to_string(img.split);
  out += " category=" + std::to_string(img.category);
  out += " active_pair=" + std::to_string(img.active_pair);
  out += " labels=";
  for (std::size_t i = 0; i < img.labels.size(); ++i) out.push_back(img.labels[i] ? '1' : '0');
  out += img.tags.small ? " size=small" : " size=large";
  out += img.tags.rare ? " frequency=rare" : " frequency=frequent";
  out += img.tags.interaction ? " interaction=yes" : " interaction=no";
  out += " relevant_context=" + img.tags.relevant_context;
  out += " pairs=" + std::to_string(c.pairs) + "x" + std::to_string(c.pair_dim) + ":";
  append_values(out, img.pairs);
  out += " parts=" + std::to_string(ctx::kBodyParts) + "x" + std::to_string(img.contexts.parts.dim) + ":";
  append_values(out, img.contexts.parts.values);
  const auto& map = img.contexts.map;
  out += " map=" + std::to_string(map.height) + "x" + std::to_string(map.width) + "x" + std::to_string(map.depth) + ":";
  append_values(out, map.values);
  const auto& masks = img.contexts.masks;
  out += " masks=" + std::to_string(masks.count()) + "x" + std::to_string(masks.height) + "x" +
         std::to_string(masks.width) + ":";
  for (const auto& mask : masks.masks)
    for (auto b : mask) out.push_back(b ? '1' : '0');
  for (const auto& p : img.contexts.providers) {
    out += " " + p.source + "=" + std::to_string(p.values.size()) + ":";
    append_values(out, p.values);
  }
  return out;
}

}  // namespace

void write_dataset(std::ostream& os, const SynDataset& data) {
  os << kMagic << ' ' << kFormatVersion;
  for (const auto& [k, v] : data.config.fields()) os << ' ' << k << '=' << v;
  os << '\n';
  for (const auto& img : data.images) os << image_record(img, data.config) << '\n';
}

void save_dataset(const std::filesystem::path& path, const SynDataset& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write dataset file " + path.string());
  write_dataset(os, data);
  if (!os) throw Error("failed writing dataset file " + path.string());
}

namespace {

class RecordParser {
 public:
  RecordParser(std::string_view line, std::size_t lineno) : lineno_(lineno) {
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto end = line.find(' ', pos);
      if (end == std::string_view::npos) end = line.size();
      if (end > pos) tokens_.push_back(line.substr(pos, end - pos));
      pos = end + 1;
    }
  }

  std::string_view kind() const { return tokens_.empty() ? std::string_view{} : tokens_[0]; }
  const std::vector<std::string_view>& tokens() const { return tokens_; }

  std::string_view field(std::string_view key) const {
    for (std::size_t i = 1; i < tokens_.size(); ++i) {
      const auto t = tokens_[i];
      if (t.size() > key.size() && t.substr(0, key.size()) == key && t[key.size()] == '=') {
        return t.substr(key.size() + 1);
      }
    }
    fail("missing field '" + std::string(key) + "'");
  }

  std::size_t size_field(std::string_view key) const { return to_size(field(key), key); }

  std::size_t to_size(std::string_view text, std::string_view key) const {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("bad integer for '" + std::string(key) + "'");
    return v;
  }

  // "AxBxC:payload" -> extents and the payload text.
  std::pair<std::vector<std::size_t>, std::string_view> shaped(std::string_view key) const {
    const auto text = field(key);
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) fail("field '" + std::string(key) + "' lacks a shape prefix");
    std::vector<std::size_t> dims;
    auto shape = text.substr(0, colon);
    std::size_t pos = 0;
    while (pos <= shape.size()) {
      auto x = shape.find('x', pos);
      if (x == std::string_view::npos) x = shape.size();
      dims.push_back(to_size(shape.substr(pos, x - pos), key));
      pos = x + 1;
    }
    return {dims, text.substr(colon + 1)};
  }

  std::vector<double> values(std::string_view key, std::size_t expected) const {
    auto [dims, payload] = shaped(key);
    std::size_t count = 1;
    for (auto d : dims) count *= d;
    if (count != expected) fail("field '" + std::string(key) + "' has unexpected shape");
    std::vector<double> out;
    out.reserve(count);
    const char* p = payload.data();
    const char* end = p + payload.size();
    while (p < end) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) fail("bad number in field '" + std::string(key) + "'");
      out.push_back(v);
      p = ptr;
      if (p < end) {
        if (*p != ',') fail("bad separator in field '" + std::string(key) + "'");
        ++p;
        if (p == end) fail("trailing separator in field '" + std::string(key) + "'");
      }
    }
    if (out.size() != expected) {
      fail("field '" + std::string(key) + "' holds " + std::to_string(out.size()) + " of " + std::to_string(expected) +
           " values");
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, lineno_); }

 private:
  std::vector<std::string_view> tokens_;
  std::size_t lineno_;
};

SynImage parse_image(const RecordParser& r, const GenConfig& c) {
  SynImage img;
  img.id = r.size_field("id");
  const auto split = r.field("split");
  if (split == "train") img.split = Split::train;
  else if (split == "test") img.split = Split::test;
  else r.fail("split must be train or test");
  img.category = r.size_field("category");
  img.active_pair = r.size_field("active_pair");
  const auto labels = r.field("labels");
  if (labels.size() != c.categories) r.fail("labels must have one digit per category");
  for (char ch : labels) {
    if (ch != '0' && ch != '1') r.fail("labels must be binary");
    img.labels.push_back(ch == '1');
  }
  const auto size = r.field("size");
  if (size != "small" && size != "large") r.fail("size must be small or large");
  img.tags.small = size == "small";
  const auto freq = r.field("frequency");
  if (freq != "rare" && freq != "frequent") r.fail("frequency must be rare or frequent");
  img.tags.rare = freq == "rare";
  const auto inter = r.field("interaction");
  if (inter != "yes" && inter != "no") r.fail("interaction must be yes or no");
  img.tags.interaction = inter == "yes";
  img.tags.relevant_context = std::string(r.field("relevant_context"));
  const auto& names = source_names();
  if (std::find(names.begin(), names.end(), img.tags.relevant_context) == names.end()) {
    r.fail("relevant_context names an unknown source");
  }

  img.pairs = r.values("pairs", c.pairs * c.pair_dim);
  img.contexts.parts.dim = c.part_dim;
  img.contexts.parts.values = r.values("parts", ctx::kBodyParts * c.part_dim);
  auto& map = img.contexts.map;
  map.height = c.map_height;
  map.width = c.map_width;
  map.depth = c.map_depth;
  map.values = r.values("map", map.pixels() * c.map_depth);

  auto [mdims, bits] = r.shaped("masks");
  if (mdims.size() != 3 || mdims[0] != c.segments || mdims[1] != c.map_height || mdims[2] != c.map_width) {
    r.fail("masks have unexpected shape");
  }
  const std::size_t pixels = c.map_height * c.map_width;
  if (bits.size() != c.segments * pixels) r.fail("masks hold the wrong number of pixels");
  auto& masks = img.contexts.masks;
  masks.height = c.map_height;
  masks.width = c.map_width;
  masks.masks.assign(c.segments, std::vector<std::uint8_t>(pixels));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') r.fail("masks must be binary");
    masks.masks[i / pixels][i % pixels] = bits[i] == '1';
  }
  try {
    masks.validate();
  } catch (const ShapeError& e) {
    r.fail(e.what());
  }
  img.contexts.providers.push_back(
      {ctx::kDeformationSource, r.values(ctx::kDeformationSource, c.deformation_dim)});
  return img;
}

}  // namespace

SynDataset read_dataset(std::istream& is) {
  SynDataset data;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw FormatError("empty dataset file", lineno);
  {
    RecordParser header(line, lineno);
    if (header.kind() != kMagic || header.tokens().size() < 2 || header.tokens()[1] != "1") {
      throw FormatError("not an ssc-dataset version 1 file", lineno);
    }
    GenConfig c;
    for (std::size_t i = 2; i < header.tokens().size(); ++i) {
      const auto t = header.tokens()[i];
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) throw FormatError("header fields must be key=value", lineno);
      try {
        c.set(t.substr(0, eq), t.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw FormatError(e.what(), lineno);
      }
    }
    if (auto v = c.violations(); !v.empty()) throw FormatError("header: " + v.front(), lineno);
    data.config = c;
  }
  const auto& c = data.config;
  data.images.reserve(c.num_images);
  while (std::getline(is, line)) {
    ++lineno;
    if (is.eof()) throw FormatError("incomplete record (no line terminator)", lineno);
    RecordParser r(line, lineno);
    if (r.kind() != "image") r.fail("expected an image record");
    data.images.push_back(parse_image(r, c));
    if (data.images.back().id != data.images.size() - 1) r.fail("image ids must be consecutive from 0");
  }
  if (data.images.size() != c.num_images) {
    throw FormatError("expected " + std::to_string(c.num_images) + " image records, found " +
                          std::to_string(data.images.size()),
                      lineno + 1);
  }
  return data;
}

SynDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read dataset file " + path.string());
  return read_dataset(is);
}

}  // namespace ssc::synth
