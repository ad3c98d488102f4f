// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

// Model file: a text header of "key value" lines, one "param <name> <kind>
// <rows> <cols>" line per tensor in canonical order, a "data" line, then
// every tensor's values as little-endian IEEE-754 doubles in the same order.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssc/error.hpp"
#include "ssc/model.hpp"

namespace ssc {

namespace {

constexpr const char* kMagic = "ssc-model 1";

void put_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double get_le(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw Error("model file: truncated parameter data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_model(const std::filesystem::path& path, const Model& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write model file " + path.string());
  const auto& c = model.config();
  os << kMagic << '\n'
     << "variant " << to_string(c.variant) << '\n'
     << "pair_dim " << c.pair_dim << '\n'
     << "categories " << c.categories << '\n'
     << "part_dim " << c.part_dim << '\n'
     << "map_depth " << c.map_depth << '\n'
     << "context_dim " << c.context_dim << '\n'
     << "key_dim " << c.key_dim << '\n'
     << "hidden1 " << c.hidden1 << '\n'
     << "hidden2 " << c.hidden2 << '\n';
  for (const auto& s : c.sources) os << "source " << s.name << ' ' << to_string(s.kind) << ' ' << s.dim << '\n';
  for (const auto& p : model.parameters().entries()) {
    os << "param " << p.name << ' ' << num::to_string(p.kind) << ' ' << p.tensor.rows() << ' ' << p.tensor.cols()
       << '\n';
  }
  os << "data\n";
  for (const auto& p : model.parameters().entries())
    for (double v : p.tensor.values()) put_le(os, v);
  if (!os) throw Error("failed writing model file " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read model file " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != kMagic) throw FormatError("not an ssc model file", lineno);

  ModelConfig c;
  c.sources.clear();
  struct Declared {
    std::string name;
    std::size_t rows, cols;
  };
  std::vector<Declared> declared;
  while (std::getline(is, line)) {
    ++lineno;
    if (line == "data") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto read_size = [&](std::size_t& field) {
      if (!(ls >> field)) throw FormatError("bad value for " + key, lineno);
    };
    if (key == "variant") {
      std::string v;
      ls >> v;
      c.variant = parse_variant(v);
    } else if (key == "pair_dim") {
      read_size(c.pair_dim);
    } else if (key == "categories") {
      read_size(c.categories);
    } else if (key == "part_dim") {
      read_size(c.part_dim);
    } else if (key == "map_depth") {
      read_size(c.map_depth);
    } else if (key == "context_dim") {
      read_size(c.context_dim);
    } else if (key == "key_dim") {
      read_size(c.key_dim);
    } else if (key == "hidden1") {
      read_size(c.hidden1);
    } else if (key == "hidden2") {
      read_size(c.hidden2);
    } else if (key == "source") {
      SourceSpec s;
      std::string kind;
      if (!(ls >> s.name >> kind >> s.dim)) throw FormatError("malformed source line", lineno);
      s.kind = parse_source_kind(kind);
      c.sources.push_back(std::move(s));
    } else if (key == "param") {
      Declared d;
      std::string kind;
      if (!(ls >> d.name >> kind >> d.rows >> d.cols)) throw FormatError("malformed param line", lineno);
      declared.push_back(std::move(d));
    } else {
      throw FormatError("unknown header key '" + key + "'", lineno);
    }
  }
  if (line != "data") throw FormatError("missing data section", lineno);

  Model model(c, 0);
  auto& entries = model.parameters().entries();
  if (entries.size() != declared.size()) {
    throw Error("model file declares " + std::to_string(declared.size()) + " tensors, config implies " +
                std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != declared[i].name || entries[i].tensor.rows() != declared[i].rows ||
        entries[i].tensor.cols() != declared[i].cols) {
      throw Error("model file tensor " + declared[i].name + " does not match the canonical layout");
    }
  }
  for (auto& e : entries)
    for (auto& v : e.tensor.mutable_values()) v = get_le(is);
  if (is.peek() != std::char_traits<char>::eof()) throw Error("model file has trailing bytes");
  return model;
}

}  // namespace ssc
