#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sargtr/model.hpp"
#include "sargtr/train.hpp"

namespace sargtr {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline int parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + v);
  }
  if (pos != v.size())
    throw std::invalid_argument("config: bad integer for " + key + ": " + v);
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
  if (pos != v.size())
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

}  // namespace detail

// Merged model + training configuration with `key = value` file support.
// Precedence is command line > file > defaults; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  void apply(const std::string& key, const std::string& value) {
    if (key == "d_n")
      model.d_n = detail::parse_int(key, value);
    else if (key == "d_e")
      model.d_e = detail::parse_int(key, value);
    else if (key == "d_h")
      model.d_h = detail::parse_int(key, value);
    else if (key == "heads")
      model.heads = detail::parse_int(key, value);
    else if (key == "mpm_layers")
      model.mpm_layers = detail::parse_int(key, value);
    else if (key == "transformer_layers")
      model.transformer_layers = detail::parse_int(key, value);
    else if (key == "gne_n")
      model.gne_n = detail::parse_int(key, value);
    else if (key == "dvm_dim")
      model.dvm_dim = detail::parse_int(key, value);
    else if (key == "leaky_slope")
      model.leaky_slope = detail::parse_double(key, value);
    else if (key == "class_count")
      model.class_count = detail::parse_int(key, value);
    else if (key == "sigma_d")
      model.sigma_d = value == "auto" ? 0.0 : detail::parse_double(key, value);
    else if (key == "learning_rate")
      train.learning_rate = detail::parse_double(key, value);
    else if (key == "beta1")
      train.beta1 = detail::parse_double(key, value);
    else if (key == "beta2")
      train.beta2 = detail::parse_double(key, value);
    else if (key == "epochs")
      train.epochs = detail::parse_int(key, value);
    else if (key == "batch_size")
      train.batch_size = detail::parse_int(key, value);
    else if (key == "seed")
      train.seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
    else if (key == "disable_dvm")
      train.ablation.disable_dvm = detail::parse_bool(key, value);
    else if (key == "disable_edge_enhance")
      train.ablation.disable_edge_enhance = detail::parse_bool(key, value);
    else if (key == "disable_gne")
      train.ablation.disable_gne = detail::parse_bool(key, value);
    else if (key == "disable_epe")
      train.ablation.disable_epe = detail::parse_bool(key, value);
    else
      throw std::invalid_argument("config: unknown key " + key);
    seen_.insert({key, value});
  }

  bool was_set(const std::string& key) const { return seen_.count(key) > 0; }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: " + path + ":" + std::to_string(line_no) +
                                    ": expected key = value");
      apply(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
  }

  // Fully resolved key/value view, for the reproducibility echo.
  std::vector<std::pair<std::string, std::string>> resolved() const {
    auto num = [](double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    };
    std::vector<std::pair<std::string, std::string>> out = {
        {"d_n", std::to_string(model.d_n)},
        {"d_e", std::to_string(model.d_e)},
        {"d_h", std::to_string(model.d_h)},
        {"heads", std::to_string(model.heads)},
        {"mpm_layers", std::to_string(model.mpm_layers)},
        {"transformer_layers", std::to_string(model.transformer_layers)},
        {"gne_n", std::to_string(model.gne_n)},
        {"dvm_dim", std::to_string(model.dvm_dim)},
        {"leaky_slope", num(model.leaky_slope)},
        {"class_count", std::to_string(model.class_count)},
        {"sigma_d", model.sigma_d > 0.0 ? num(model.sigma_d) : std::string("auto")},
        {"learning_rate", num(train.learning_rate)},
        {"beta1", num(train.beta1)},
        {"beta2", num(train.beta2)},
        {"epochs", std::to_string(train.epochs)},
        {"batch_size", std::to_string(train.batch_size)},
        {"seed", std::to_string(train.seed)},
        {"disable_dvm", train.ablation.disable_dvm ? "true" : "false"},
        {"disable_edge_enhance", train.ablation.disable_edge_enhance ? "true" : "false"},
        {"disable_gne", train.ablation.disable_gne ? "true" : "false"},
        {"disable_epe", train.ablation.disable_epe ? "true" : "false"},
    };
    return out;
  }

 private:
  std::map<std::string, std::string> seen_;
};

}  // namespace sargtr
