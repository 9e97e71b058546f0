#include "iact/io/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "iact/core/error.hpp"
#include "iact/core/hash.hpp"

namespace iact::io {
namespace {

using nlohmann::json;

const char* stacking_name(Stacking s) { return s == Stacking::kInterleaved ? "interleaved" : "sequential"; }
const char* precision_name(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

/// Reads fields out of one JSON object, rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const json::exception& e) {
      throw ConfigError("config: '" + path_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + path_ + "." + it.key() + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

json config_to_json(const ModelConfig& c) {
  json model = {
      {"d_model", c.d_model},
      {"n_heads", c.n_heads},
      {"ffn_dim", c.ffn_dim},
      {"dropout", c.dropout},
      {"pre_norm", c.pre_norm},
      {"seg_layers", c.seg_layers},
      {"cross_layers", c.cross_layers},
      {"dec_layers", c.dec_layers},
      {"sync_layers", c.sync_layers},
      {"sync_position", c.sync_position},
      {"stacking", stacking_name(c.stacking)},
      {"cls_counts", c.cls_counts},
      {"joints_per_arm", c.joints_per_arm},
      {"chunk_size", c.chunk_size},
      {"use_visual", c.use_visual},
      {"image", {{"height", c.image_height}, {"width", c.image_width}, {"channels", c.image_channels}}},
      {"stem_blocks", c.stem_blocks},
      {"stem_channels", c.stem_channels},
      {"use_latent", c.use_latent},
      {"latent_dim", c.latent_dim},
      {"style_layers", c.style_layers},
  };
  json train = {
      {"lr", c.lr},
      {"beta", c.beta},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"batch_size", c.batch_size},
      {"steps", c.steps},
      {"checkpoint_interval", c.checkpoint_interval},
  };
  return json{
      {"profile", c.profile},
      {"model", model},
      {"train", train},
      {"inference", {{"ensemble_decay", c.ensemble_decay}}},
      {"ablation", {{"no_cls", c.ablation.no_cls}, {"no_cross", c.ablation.no_cross}, {"no_sync", c.ablation.no_sync}}},
      {"precision", precision_name(c.precision)},
      {"seed", c.seed},
  };
}

ModelConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: document must be an object");
  std::string profile = "desk";
  if (auto it = doc.find("profile"); it != doc.end()) {
    if (!it->is_string()) throw ConfigError("config: 'profile' must be a string");
    profile = it->get<std::string>();
  }
  ModelConfig c = ModelConfig::named(profile);

  Reader top(doc, "$");
  top.get("profile", c.profile);
  if (const json* m = top.child("model")) {
    Reader r(*m, "model");
    r.get("d_model", c.d_model);
    r.get("n_heads", c.n_heads);
    r.get("ffn_dim", c.ffn_dim);
    r.get("dropout", c.dropout);
    r.get("pre_norm", c.pre_norm);
    r.get("seg_layers", c.seg_layers);
    r.get("cross_layers", c.cross_layers);
    r.get("dec_layers", c.dec_layers);
    r.get("sync_layers", c.sync_layers);
    r.get("sync_position", c.sync_position);
    std::string stacking = stacking_name(c.stacking);
    r.get("stacking", stacking);
    if (stacking == "interleaved") {
      c.stacking = Stacking::kInterleaved;
    } else if (stacking == "sequential") {
      c.stacking = Stacking::kSequential;
    } else {
      throw ConfigError("config: model.stacking must be interleaved or sequential, got '" + stacking + "'");
    }
    r.get("cls_counts", c.cls_counts);
    r.get("joints_per_arm", c.joints_per_arm);
    r.get("chunk_size", c.chunk_size);
    r.get("use_visual", c.use_visual);
    if (const json* img = r.child("image")) {
      Reader ir(*img, "model.image");
      ir.get("height", c.image_height);
      ir.get("width", c.image_width);
      ir.get("channels", c.image_channels);
      ir.finish();
    }
    r.get("stem_blocks", c.stem_blocks);
    r.get("stem_channels", c.stem_channels);
    r.get("use_latent", c.use_latent);
    r.get("latent_dim", c.latent_dim);
    r.get("style_layers", c.style_layers);
    r.finish();
  }
  if (const json* t = top.child("train")) {
    Reader r(*t, "train");
    r.get("lr", c.lr);
    r.get("beta", c.beta);
    r.get("adam_beta1", c.adam_beta1);
    r.get("adam_beta2", c.adam_beta2);
    r.get("adam_eps", c.adam_eps);
    r.get("batch_size", c.batch_size);
    r.get("steps", c.steps);
    r.get("checkpoint_interval", c.checkpoint_interval);
    r.finish();
  }
  if (const json* i = top.child("inference")) {
    Reader r(*i, "inference");
    r.get("ensemble_decay", c.ensemble_decay);
    r.finish();
  }
  if (const json* a = top.child("ablation")) {
    Reader r(*a, "ablation");
    r.get("no_cls", c.ablation.no_cls);
    r.get("no_cross", c.ablation.no_cross);
    r.get("no_sync", c.ablation.no_sync);
    r.finish();
  }
  std::string precision = precision_name(c.precision);
  top.get("precision", precision);
  if (precision == "f32") {
    c.precision = Precision::kF32;
  } else if (precision == "f64") {
    c.precision = Precision::kF64;
  } else {
    throw ConfigError("config: precision must be f32 or f64, got '" + precision + "'");
  }
  top.get("seed", c.seed);
  top.finish();
  c.validate();
  return c;
}

std::string canonical_config_text(const ModelConfig& config) { return config_to_json(config).dump(); }

std::uint64_t config_digest(const ModelConfig& config) { return fnv1a64(canonical_config_text(config)); }

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const ModelConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << config_to_json(config).dump(2) << '\n';
}

}  // namespace iact::io
