#include "config.hpp"

namespace ebert {

const std::set<std::string>& Config::known_keys() {
  static const std::set<std::string> keys = {
      // paths
      "products", "reviews", "vocab", "phrase_pool", "graph", "out_dir", "init_checkpoint", "pos_lexicon",
      // model
      "layers", "hidden_size", "num_heads", "ffn_size", "max_seq_len", "dropout",
      // optimization
      "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "clip_norm", "train_steps",
      "checkpoint_every", "log_every", "lambda_npr", "rng_seed",
      // masking
      "mask_rate", "alpha0", "t1_iters", "ema_decay", "masking_scheme",
  };
  return keys;
}

void Config::set_checked(const std::string& key, const std::string& value, const std::string& where) {
  if (!known_keys().count(key)) throw_data(where + ": unknown config key '" + key + "'");
  values_[key] = value;
}

Config Config::load(const std::string& path) {
  Config cfg;
  for_each_line(path, [&](size_t line_no, const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') return;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw_data(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    cfg.set_checked(key, value, path + ":" + std::to_string(line_no));
  });
  return cfg;
}

void Config::apply_overrides(const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw_data("override '" + kv + "': expected key=value");
    set_checked(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "override");
  }
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(it->second, "config key " + key);
}

long Config::get_long(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_long(it->second, "config key " + key);
}

uint64_t Config::get_seed(const std::string& key, uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return uint64_t(parse_long(it->second, "config key " + key));
}

}  // namespace ebert
