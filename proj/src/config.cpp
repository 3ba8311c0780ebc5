#include "gevnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gevnet/errors.hpp"

namespace gev {

void TrainConfig::check() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (lr <= 0.0) throw ConfigError("lr must be > 0");
  if (lr_decay <= 0.0 || lr_decay > 1.0) throw ConfigError("lr_decay must be in (0, 1]");
  if (n_samples < 3) throw ConfigError("n_samples must be >= 3");
  if (quadrature < 24) throw ConfigError("quadrature must be >= 24");
  if (arch.empty()) throw ConfigError("arch descriptor is required");
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  const auto b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + ov);
    kv[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  auto geti = [&](const char* k, int d) { return kv.count(k) ? std::stoi(kv.at(k)) : d; };
  auto getd = [&](const char* k, double d) { return kv.count(k) ? std::stod(kv.at(k)) : d; };
  auto gets = [&](const char* k, std::string d) { return kv.count(k) ? kv.at(k) : d; };
  auto getb = [&](const char* k, bool d) {
    if (!kv.count(k)) return d;
    const std::string v = kv.at(k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(std::string("boolean expected for ") + k + ", got " + v);
  };
  c.arch = gets("arch", "");
  c.level = geti("level", c.level);
  c.epochs = geti("epochs", c.epochs);
  c.batch = geti("batch", c.batch);
  c.lr = getd("lr", c.lr);
  c.lr_decay = getd("lr_decay", c.lr_decay);
  c.weight_decay = getd("weight_decay", c.weight_decay);
  c.n_samples = geti("n_samples", c.n_samples);
  c.quadrature = geti("quadrature", c.quadrature);
  c.seed = static_cast<std::uint64_t>(std::stoll(gets("seed", std::to_string(c.seed))));
  c.float32 = getb("float32", c.float32);
  c.mixup = getb("mixup", c.mixup);
  c.mixup_alpha = getd("mixup_alpha", c.mixup_alpha);
  c.deterministic = getb("deterministic", c.deterministic);
  c.train_data = gets("train_data", "");
  c.test_data = gets("test_data", "");
  c.out_checkpoint = gets("out_checkpoint", c.out_checkpoint);
  c.metrics_csv = gets("metrics_csv", c.metrics_csv);
  c.check();
  return c;
}

namespace {

FeatureType parse_type(const std::string& s) {
  if (s == "s") return {1, 0};
  if (s == "v") return {0, 1};
  if (s == "sv") return {1, 1};
  throw ConfigError("unknown feature type '" + s + "' (expected s, v or sv)");
}

// splits "12sv" into (12, {1,1})
std::pair<int, FeatureType> parse_channels_type(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == 0 || i == s.size()) throw ConfigError("expected <channels><type>, got '" + s + "'");
  return {std::stoi(s.substr(0, i)), parse_type(s.substr(i))};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
  return out;
}

std::string type_str(FeatureType t) {
  std::string s;
  if (t.n0 == 1) s += "s";
  if (t.n1 == 1) s += "v";
  if (t.n0 > 1 || t.n1 > 1 || s.empty())
    throw ConfigError("descriptor supports types s, v, sv only");
  return s;
}

}  // namespace

Architecture parse_architecture(const std::string& descriptor, int input_level, int n_samples,
                                bool exact_nonlin) {
  Architecture arch;
  arch.input_level = input_level;
  arch.input_channels = 0;  // filled from the first conv
  arch.input_type = FeatureType::scalar();

  for (const std::string& item : split(descriptor, ',')) {
    const auto parts = split(item, ':');
    const std::string& kind = parts[0];
    if (kind == "geconv" || kind == "gevconv") {
      if (parts.size() != 3) throw ConfigError("conv layer needs <cin><ty>:<cout><ty>: " + item);
      const auto [cin, tin] = parse_channels_type(parts[1]);
      const auto [cout, tout] = parse_channels_type(parts[2]);
      if (arch.input_channels == 0) {
        arch.input_channels = cin;
        arch.input_type = tin;
      }
      arch.layers.push_back(kind == "gevconv" ? gevconv(cin, tin, cout, tout)
                                              : geconv(cin, tin, cout, tout));
    } else if (kind == "nonlin") {
      arch.layers.push_back(nonlinearity(n_samples, /*batchnorm=*/true, exact_nonlin));
    } else if (kind == "pool") {
      arch.layers.push_back(pool_layer());
    } else if (kind == "globalpool") {
      arch.layers.push_back(global_pool_layer());
    } else if (kind == "dense") {
      if (parts.size() != 3) throw ConfigError("dense layer needs :<in>:<out>: " + item);
      arch.layers.push_back(dense_layer(std::stoi(parts[1]), std::stoi(parts[2])));
    } else {
      throw ConfigError("unknown layer kind '" + kind + "'");
    }
  }
  if (arch.input_channels == 0) throw ConfigError("descriptor has no conv layer");
  validate(arch);
  return arch;
}

std::string architecture_to_string(const Architecture& arch) {
  std::string out;
  for (const LayerSpec& l : arch.layers) {
    if (!out.empty()) out += ",";
    switch (l.kind) {
      case LayerSpec::Kind::Conv:
        out += (l.second_order ? "gevconv:" : "geconv:") + std::to_string(l.c_in) +
               type_str(l.in_type) + ":" + std::to_string(l.c_out) + type_str(l.out_type);
        break;
      case LayerSpec::Kind::Nonlinearity:
        out += "nonlin";
        break;
      case LayerSpec::Kind::Pool:
        out += "pool";
        break;
      case LayerSpec::Kind::GlobalPool:
        out += "globalpool";
        break;
      case LayerSpec::Kind::Dense:
        out += "dense:" + std::to_string(l.dense_in) + ":" + std::to_string(l.dense_out);
        break;
    }
  }
  return out;
}

}  // namespace gev
