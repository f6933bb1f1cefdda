#include <cmath>
#include <fmt/format.h>

#include "ptl/error.hpp"
#include "ptl/model.hpp"
#include "ptl/random.hpp"

namespace ptl {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::transformer ? "transformer" : "mlp";
}

std::string_view to_string(AttentionKind kind) {
  return kind == AttentionKind::vector ? "vector" : "scalar";
}

void ModelConfig::validate() const {
  if (widths.empty()) throw ConfigError("model.widths must list at least one stage width");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("model.widths entries must be >= 1");
  }
  if (k == 0) throw ConfigError("model.k must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("model.ratio must lie in (0, 1]");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (head_hidden == 0) throw ConfigError("model.head_hidden must be >= 1");
  if (mlp_hidden == 0) throw ConfigError("model.mlp_hidden must be >= 1");
}

void ModelConfig::write_to(KeyValues& kv) const {
  std::vector<std::string> ws;
  for (auto w : widths) ws.push_back(std::to_string(w));
  kv.set("model.kind", std::string(to_string(kind)));
  kv.set("model.widths", join(ws, ","));
  kv.set("model.k", std::to_string(k));
  kv.set("model.ratio", fmt::format("{}", ratio));
  kv.set("model.num_classes", std::to_string(num_classes));
  kv.set("model.head_hidden", std::to_string(head_hidden));
  kv.set("model.pos_hidden", std::to_string(pos_hidden));
  kv.set("model.attention", std::string(to_string(attention)));
  kv.set("model.mlp_hidden", std::to_string(mlp_hidden));
}

namespace {

std::size_t positive(const KeyValues& kv, std::string_view key, std::size_t fallback) {
  const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ModelConfig ModelConfig::read_from(const KeyValues& kv) {
  ModelConfig c;
  const auto kind = kv.get_string("model.kind", "transformer");
  if (kind == "transformer") {
    c.kind = ModelKind::transformer;
  } else if (kind == "mlp") {
    c.kind = ModelKind::mlp;
  } else {
    throw ConfigError("model.kind must be transformer or mlp, got '" + kind + "'");
  }
  if (kv.contains("model.widths")) {
    c.widths.clear();
    for (const auto& w : kv.get_list("model.widths", {})) {
      KeyValues one;
      one.set("model.widths", w);
      c.widths.push_back(positive(one, "model.widths", 0));
    }
  }
  c.k = positive(kv, "model.k", c.k);
  c.ratio = kv.get_double("model.ratio", c.ratio);
  c.num_classes = positive(kv, "model.num_classes", c.num_classes);
  c.head_hidden = positive(kv, "model.head_hidden", c.head_hidden);
  c.pos_hidden = positive(kv, "model.pos_hidden", c.pos_hidden);
  const auto attn = kv.get_string("model.attention", "vector");
  if (attn == "vector") {
    c.attention = AttentionKind::vector;
  } else if (attn == "scalar") {
    c.attention = AttentionKind::scalar;
  } else {
    throw ConfigError("model.attention must be vector or scalar, got '" + attn + "'");
  }
  c.mlp_hidden = positive(kv, "model.mlp_hidden", c.mlp_hidden);
  c.validate();
  return c;
}

bool ModelConfig::same_backbone(const ModelConfig& other) const {
  ModelConfig a = *this;
  a.num_classes = other.num_classes;
  return a == other;
}

// ---- ParamStore ---------------------------------------------------------------

void ParamStore::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

void ParamStore::replace(std::string_view name, Tensor tensor) {
  for (auto& [n, t] : entries_) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

const Tensor& ParamStore::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : entries_) {
    Tensor copy = t.clone();
    copy.set_requires_grad(t.requires_grad());
    out.add(name, std::move(copy));
  }
  return out;
}

// ---- layout and init -------------------------------------------------------------

namespace {

void dense(std::vector<std::pair<std::string, Shape>>& out, const std::string& name, std::size_t in,
           std::size_t o) {
  out.emplace_back(name + ".weight", Shape{in, o});
  out.emplace_back(name + ".bias", Shape{o});
}

void attention_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                      std::size_t c, std::size_t pos_hidden) {
  const std::size_t cp = pos_hidden ? pos_hidden : c;
  dense(out, prefix + "phi", c, c);
  dense(out, prefix + "psi", c, c);
  dense(out, prefix + "alpha", c, c);
  dense(out, prefix + "pos1", 3, cp);
  dense(out, prefix + "pos2", cp, c);
  dense(out, prefix + "gamma1", c, c);
  dense(out, prefix + "gamma2", c, c);
}

Tensor init_tensor(const std::string& name, const Shape& shape, std::uint64_t seed) {
  Tensor t(shape, true);
  if (name.ends_with(".bias")) return t;
  const double bound = std::sqrt(3.0 / static_cast<double>(shape[0]));
  Rng rng(derive_seed(seed, {stable_hash(name)}));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.mutable_data()) v = u(rng);
  return t;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const auto& w = config.widths;
  if (config.kind == ModelKind::transformer) {
    dense(out, "embed.fc1", 3, w[0]);
    dense(out, "embed.fc2", w[0], w[0]);
    for (std::size_t s = 0; s < w.size(); ++s) {
      const std::string stage = "stage" + std::to_string(s);
      attention_layout(out, stage + ".attn.", w[s], config.pos_hidden);
      dense(out, stage + ".down", w[s], w[std::min(s + 1, w.size() - 1)]);
    }
    attention_layout(out, "final.attn.", w.back(), config.pos_hidden);
    dense(out, "head.fc1", w.back(), config.head_hidden);
  } else {
    dense(out, "mlp.fc1", kMlpEmbedding, config.mlp_hidden);
    for (int i = 2; i <= 4; ++i) {
      dense(out, "mlp.fc" + std::to_string(i), config.mlp_hidden, config.mlp_hidden);
    }
    dense(out, "head.fc1", config.mlp_hidden, config.head_hidden);
  }
  dense(out, "head.fc2", config.head_hidden, config.num_classes);
  return out;
}

bool is_head_param(std::string_view name) { return name.starts_with("head."); }

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams params;
  params.config = config;
  for (const auto& [name, shape] : param_layout(config)) {
    params.tensors.add(name, init_tensor(name, shape, seed));
  }
  return params;
}

ModelParams reinit_head(const ModelParams& params, std::size_t new_num_classes, std::uint64_t seed) {
  ModelParams out;
  out.config = params.config;
  out.config.num_classes = new_num_classes;
  for (const auto& [name, shape] : param_layout(out.config)) {
    if (is_head_param(name)) {
      out.tensors.add(name, init_tensor(name, shape, seed));
    } else {
      Tensor copy = params.tensors.at(name).clone();
      copy.set_requires_grad(true);
      out.tensors.add(name, std::move(copy));
    }
  }
  return out;
}

void validate_params(const ParamStore& store, const ModelConfig& config) {
  const auto layout = param_layout(config);
  std::vector<std::string> missing, unexpected;
  for (const auto& [name, shape] : layout) {
    if (!store.contains(name)) missing.push_back(name);
  }
  for (const auto& name : store.names()) {
    bool known = false;
    for (const auto& entry : layout) known = known || entry.first == name;
    if (!known) unexpected.push_back(name);
  }
  if (!missing.empty() || !unexpected.empty()) {
    std::string msg = "parameter names do not match the model config";
    if (!missing.empty()) msg += "; missing: " + join(missing, ", ");
    if (!unexpected.empty()) msg += "; unexpected: " + join(unexpected, ", ");
    throw ConfigError(msg);
  }
  for (const auto& [name, shape] : layout) {
    const auto& have = store.at(name).shape();
    if (have != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_str(have) + ", config expects " +
                       shape_str(shape));
    }
  }
}

}  // namespace ptl
