#include "sten/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sten/errors.hpp"

namespace sten {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": " + value);
  }
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": " + value);
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": " + value);
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("bad value for " + key + ": " + value + " (want 0/1/true/false)");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

bool apply_model_entry(ModelConfig& c, const std::string& key, const std::string& value) {
  if (key == "embed_dim") c.embed_dim = to_size(key, value);
  else if (key == "hash_table_size") c.hash_table_size = to_size(key, value);
  else if (key == "seq_len") c.seq_len = to_size(key, value);
  else if (key == "ffn_hidden") c.ffn_hidden = to_size(key, value);
  else if (key == "att_dim") c.att_dim = to_size(key, value);
  else if (key == "tower") {
    std::istringstream ts(value);
    std::string part;
    for (std::size_t i = 0; i < c.tower.size(); ++i) {
      if (!std::getline(ts, part, ',')) {
        throw ConfigError("tower needs " + std::to_string(c.tower.size()) + " widths: " + value);
      }
      c.tower[i] = to_size(key, trim(part));
    }
    if (std::getline(ts, part, ',')) throw ConfigError("tower has extra widths: " + value);
  } else if (key == "period_breakfast") c.periods.breakfast = to_int(key, value);
  else if (key == "period_lunch") c.periods.lunch = to_int(key, value);
  else if (key == "period_afternoon_tea") c.periods.afternoon_tea = to_int(key, value);
  else if (key == "period_dinner") c.periods.dinner = to_int(key, value);
  else if (key == "period_night_snack") c.periods.night_snack = to_int(key, value);
  else if (key == "t_clamp_hours") c.t_clamp_hours = to_double(key, value);
  else if (key == "ablation_stpro") c.ablation.stpro = to_bool(key, value);
  else if (key == "ablation_stpre") c.ablation.stpre = to_bool(key, value);
  else if (key == "ablation_stta") c.ablation.stta = to_bool(key, value);
  else return false;
  return true;
}

bool apply_train_entry(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "batch_size") c.batch_size = to_size(key, value);
  else if (key == "base_lr") c.base_lr = to_double(key, value);
  else if (key == "peak_lr") c.peak_lr = to_double(key, value);
  else if (key == "warmup_steps") c.warmup_steps = to_size(key, value);
  else if (key == "total_steps") c.total_steps = to_size(key, value);
  else if (key == "accumulator_decay") c.accumulator_decay = to_double(key, value);
  else if (key == "eps") c.eps = to_double(key, value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_size(key, value));
  else if (key == "eval_interval") c.eval_interval = to_size(key, value);
  else return false;
  return true;
}

}  // namespace

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
  if (apply_model_entry(config.model, key, value)) return;
  if (apply_train_entry(config.train, key, value)) return;
  throw ConfigError("unknown config key: " + key);
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_config_entry(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read failure on " + path);
}

RunConfig load_run_config(const std::string& path) {
  RunConfig config;
  apply_config_file(config, path);
  return config;
}

std::string model_config_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "embed_dim = " << c.embed_dim << "\n";
  os << "hash_table_size = " << c.hash_table_size << "\n";
  os << "seq_len = " << c.seq_len << "\n";
  os << "ffn_hidden = " << c.ffn_hidden << "\n";
  os << "att_dim = " << c.att_dim << "\n";
  os << "tower = " << c.tower[0] << "," << c.tower[1] << "," << c.tower[2] << "\n";
  os << "period_breakfast = " << c.periods.breakfast << "\n";
  os << "period_lunch = " << c.periods.lunch << "\n";
  os << "period_afternoon_tea = " << c.periods.afternoon_tea << "\n";
  os << "period_dinner = " << c.periods.dinner << "\n";
  os << "period_night_snack = " << c.periods.night_snack << "\n";
  os << "t_clamp_hours = " << fmt(c.t_clamp_hours) << "\n";
  os << "ablation_stpro = " << (c.ablation.stpro ? 1 : 0) << "\n";
  os << "ablation_stpre = " << (c.ablation.stpre ? 1 : 0) << "\n";
  os << "ablation_stta = " << (c.ablation.stta ? 1 : 0) << "\n";
  return os.str();
}

ModelConfig parse_model_config_text(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value: " + t);
    std::string key = trim(t.substr(0, eq));
    if (!apply_model_entry(c, key, trim(t.substr(eq + 1)))) {
      throw ConfigError("unknown config key: " + key);
    }
  }
  return c;
}

std::string run_config_text(const RunConfig& config) {
  std::ostringstream os;
  os << model_config_text(config.model);
  const TrainConfig& t = config.train;
  os << "batch_size = " << t.batch_size << "\n";
  os << "base_lr = " << fmt(t.base_lr) << "\n";
  os << "peak_lr = " << fmt(t.peak_lr) << "\n";
  os << "warmup_steps = " << t.warmup_steps << "\n";
  os << "total_steps = " << t.total_steps << "\n";
  os << "accumulator_decay = " << fmt(t.accumulator_decay) << "\n";
  os << "eps = " << fmt(t.eps) << "\n";
  os << "seed = " << t.seed << "\n";
  os << "eval_interval = " << t.eval_interval << "\n";
  return os.str();
}

}  // namespace sten
