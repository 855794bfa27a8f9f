// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "mesrnn/error.hpp"

namespace mesrnn::model {
namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::optional<std::string_view> next() {
    if (pos_ >= text_.size()) return std::nullopt;
    const auto end = text_.find('\n', pos_);
    const auto stop = end == std::string_view::npos ? text_.size() : end;
    std::string_view line = text_.substr(pos_, stop - pos_);
    pos_ = stop + 1;
    ++line_no_;
    return line;
  }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  const ModelDims& d = ck.params.dims;
  std::ostringstream out;
  out << kCheckpointMagic << '\n';
  out << "variant=" << to_string(ck.params.variant)
      << " edge_embed=" << d.edge_embed << " edge_hidden=" << d.edge_hidden
      << " node_embed=" << d.node_embed << " node_hidden=" << d.node_hidden
      << " vlstm_embed=" << d.vlstm_embed
      << " vlstm_hidden=" << d.vlstm_hidden
      << " dropout=" << format_double(ck.meta.dropout)
      << " seed=" << ck.meta.seed << " obs=" << ck.meta.obs
      << " pred=" << ck.meta.pred
      << " norm_min_x=" << format_double(ck.norm.min_x)
      << " norm_max_x=" << format_double(ck.norm.max_x)
      << " norm_min_y=" << format_double(ck.norm.min_y)
      << " norm_max_y=" << format_double(ck.norm.max_y)
      << " frame_interval=" << format_double(ck.meta.frame_interval) << '\n';
  for (const auto& [name, tensor] : ck.params.tensors) {
    out << "tensor " << name;
    for (auto extent : tensor.shape()) out << ' ' << extent;
    out << '\n';
    for (double v : tensor.data()) out << format_double(v) << '\n';
  }
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text,
                            std::optional<Variant> expected) {
  LineReader reader(text);
  const auto magic = reader.next();
  if (!magic || *magic != kCheckpointMagic) {
    throw CheckpointError("checkpoint header is not '" +
                          std::string(kCheckpointMagic) +
                          "' (unsupported version or not a checkpoint)");
  }
  const auto meta_line = reader.next();
  if (!meta_line) throw CheckpointError("checkpoint truncated before metadata");

  std::map<std::string, std::string, std::less<>> kv;
  for (auto token : split_spaces(*meta_line)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw CheckpointError("malformed metadata token '" + std::string(token) +
                            "'");
    }
    kv.emplace(std::string(token.substr(0, eq)),
               std::string(token.substr(eq + 1)));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw CheckpointError("checkpoint metadata lacks '" + std::string(key) +
                            "'");
    }
    return it->second;
  };
  auto get_size = [&](std::string_view key) {
    auto v = parse_number<std::size_t>(get(key));
    if (!v) throw CheckpointError("bad integer for '" + std::string(key) + "'");
    return *v;
  };
  auto get_double = [&](std::string_view key) {
    auto v = parse_number<double>(get(key));
    if (!v) throw CheckpointError("bad number for '" + std::string(key) + "'");
    return *v;
  };

  Checkpoint ck;
  try {
    ck.params.variant = parse_variant(get("variant"));
  } catch (const ContractError& e) {
    throw CheckpointError(e.what());
  }
  if (expected && *expected != ck.params.variant) {
    throw CheckpointError("checkpoint holds variant '" +
                          std::string(to_string(ck.params.variant)) +
                          "', expected '" + std::string(to_string(*expected)) +
                          "'");
  }
  ModelDims& d = ck.params.dims;
  d.edge_embed = get_size("edge_embed");
  d.edge_hidden = get_size("edge_hidden");
  d.node_embed = get_size("node_embed");
  d.node_hidden = get_size("node_hidden");
  d.vlstm_embed = get_size("vlstm_embed");
  d.vlstm_hidden = get_size("vlstm_hidden");
  ck.meta.dropout = get_double("dropout");
  {
    auto seed = parse_number<std::uint64_t>(get("seed"));
    if (!seed) throw CheckpointError("bad integer for 'seed'");
    ck.meta.seed = *seed;
  }
  ck.meta.obs = get_size("obs");
  ck.meta.pred = get_size("pred");
  ck.meta.frame_interval = get_double("frame_interval");
  ck.norm = {get_double("norm_min_x"), get_double("norm_max_x"),
             get_double("norm_min_y"), get_double("norm_max_y")};

  for (const auto& [name, shape] : parameter_layout(ck.params.variant, d)) {
    const auto header = reader.next();
    if (!header) {
      throw CheckpointError("checkpoint truncated: missing tensor '" + name +
                            "'");
    }
    const auto tokens = split_spaces(*header);
    if (tokens.size() < 3 || tokens[0] != "tensor" || tokens[1] != name) {
      throw CheckpointError("line " + std::to_string(reader.line_no()) +
                            ": expected header of tensor '" + name + "'");
    }
    ad::Shape declared;
    for (std::size_t k = 2; k < tokens.size(); ++k) {
      auto extent = parse_number<std::size_t>(tokens[k]);
      if (!extent) throw CheckpointError("tensor '" + name + "': bad extent");
      declared.push_back(*extent);
    }
    if (declared != shape) {
      throw CheckpointError("tensor '" + name + "' has shape " +
                            ad::shape_string(declared) + ", variant " +
                            std::string(to_string(ck.params.variant)) +
                            " needs " + ad::shape_string(shape));
    }
    ad::Tensor t(shape);
    for (double& v : t.data()) {
      const auto line = reader.next();
      if (!line || *line == "end" || line->starts_with("tensor ")) {
        throw CheckpointError("tensor '" + name + "' is truncated");
      }
      const auto value = parse_number<double>(*line);
      if (!value) {
        throw CheckpointError("tensor '" + name + "': bad value at line " +
                              std::to_string(reader.line_no()));
      }
      v = *value;
    }
    ck.params.tensors.add(name, std::move(t));
  }
  const auto tail = reader.next();
  if (!tail || *tail != "end") {
    throw CheckpointError(
        "checkpoint has extra data after the last tensor (expected 'end' at "
        "line " + std::to_string(reader.line_no()) + ")");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(checkpoint);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Variant> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), expected);
}

}  // namespace mesrnn::model
