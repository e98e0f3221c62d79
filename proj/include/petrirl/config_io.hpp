#pragma once

// Flat key = value configuration files. '#' starts a comment; blank lines
// are ignored. Keys mirror the ScenarioConfig and TrainConfig field names.
//
//   # scenario
//   breakdowns_enabled = true
//   weibull_shape = 2.0
//
//   # training
//   hidden = 64,64
//   masking_mode = masked

#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "petrirl/disruptions.hpp"
#include "petrirl/error.hpp"
#include "petrirl/instance_io.hpp"
#include "petrirl/ppo.hpp"

namespace petrirl {

struct ConfigValue {
  std::string text;
  int line = 0;
};

using KeyValues = std::map<std::string, ConfigValue>;

inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line);
    if (kv.count(key)) throw ParseError("duplicate key '" + key + "'", line);
    kv[key] = {value, line};
  }
  return kv;
}

inline KeyValues load_key_values(const std::string& path) { return parse_key_values(detail::read_file(path)); }

namespace detail {

inline bool as_bool(const ConfigValue& v) {
  if (v.text == "true" || v.text == "1" || v.text == "yes") return true;
  if (v.text == "false" || v.text == "0" || v.text == "no") return false;
  throw ParseError("'" + v.text + "' is not a boolean", v.line);
}

inline double as_double(const ConfigValue& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v.text, &used);
    if (used == v.text.size()) return x;
  } catch (const std::exception&) {
  }
  throw ParseError("'" + v.text + "' is not a number", v.line);
}

template <typename Int>
Int as_int(const ConfigValue& v) {
  Int x{};
  const auto [ptr, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), x);
  if (ec != std::errc() || ptr != v.text.data() + v.text.size()) {
    throw ParseError("'" + v.text + "' is not an integer", v.line);
  }
  return x;
}

inline std::vector<int> as_int_list(const ConfigValue& v) {
  std::vector<int> out;
  std::istringstream in(v.text);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(as_int<int>({trim(tok), v.line}));
  if (out.empty()) throw ParseError("empty list", v.line);
  return out;
}

}  // namespace detail

/// Reads the scenario keys; unknown keys are an error unless `allow_other`.
inline ScenarioConfig scenario_from_kv(const KeyValues& kv, bool allow_other = false) {
  using namespace detail;
  ScenarioConfig c;
  for (const auto& [key, v] : kv) {
    if (key == "breakdowns_enabled") c.breakdowns_enabled = as_bool(v);
    else if (key == "weibull_shape") c.weibull_shape = as_double(v);
    else if (key == "weibull_scale_factor") c.weibull_scale_factor = as_double(v);
    else if (key == "repair_mean") c.repair_mean = as_double(v);
    else if (key == "repair_std") c.repair_std = as_double(v);
    else if (key == "arrivals_enabled") c.arrivals_enabled = as_bool(v);
    else if (key == "skew_min") c.skew_min = as_double(v);
    else if (key == "skew_max") c.skew_max = as_double(v);
    else if (key == "seed") c.seed = as_int<std::uint64_t>(v);
    else if (!allow_other) throw ParseError("unknown scenario key '" + key + "'", v.line);
  }
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
  return c;
}

inline MaskingMode parse_masking_mode(const ConfigValue& v) {
  if (v.text == "masked") return MaskingMode::masked;
  if (v.text == "unmasked_fallback") return MaskingMode::unmasked_fallback;
  throw ParseError("masking_mode must be 'masked' or 'unmasked_fallback'", v.line);
}

inline TrainConfig train_from_kv(const KeyValues& kv, bool allow_other = false) {
  using namespace detail;
  TrainConfig c;
  for (const auto& [key, v] : kv) {
    if (key == "gamma") c.gamma = as_double(v);
    else if (key == "gae_lambda") c.gae_lambda = as_double(v);
    else if (key == "clip_epsilon") c.clip_epsilon = as_double(v);
    else if (key == "clip_decay") c.clip_decay = as_bool(v);
    else if (key == "learning_rate") c.learning_rate = as_double(v);
    else if (key == "value_coef") c.value_coef = as_double(v);
    else if (key == "entropy_coef") c.entropy_coef = as_double(v);
    else if (key == "invalid_lambda") c.invalid_lambda = as_double(v);
    else if (key == "max_grad_norm") c.max_grad_norm = as_double(v);
    else if (key == "rollout_length") c.rollout_length = as_int<int>(v);
    else if (key == "n_envs") c.n_envs = as_int<int>(v);
    else if (key == "epochs_per_update") c.epochs_per_update = as_int<int>(v);
    else if (key == "minibatch_size") c.minibatch_size = as_int<int>(v);
    else if (key == "total_steps") c.total_steps = as_int<long>(v);
    else if (key == "eval_interval") c.eval_interval = as_int<int>(v);
    else if (key == "eval_episodes") c.eval_episodes = as_int<int>(v);
    else if (key == "hidden") c.hidden = as_int_list(v);
    else if (key == "seed") c.seed = as_int<std::uint64_t>(v);
    else if (key == "masking_mode") c.masking_mode = parse_masking_mode(v);
    else if (!allow_other) throw ParseError("unknown training key '" + key + "'", v.line);
  }
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
  return c;
}

inline std::string to_key_values(const ScenarioConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "breakdowns_enabled = " << (c.breakdowns_enabled ? "true" : "false") << '\n'
     << "weibull_shape = " << c.weibull_shape << '\n'
     << "weibull_scale_factor = " << c.weibull_scale_factor << '\n';
  if (c.repair_mean) os << "repair_mean = " << *c.repair_mean << '\n';
  if (c.repair_std) os << "repair_std = " << *c.repair_std << '\n';
  os << "arrivals_enabled = " << (c.arrivals_enabled ? "true" : "false") << '\n'
     << "skew_min = " << c.skew_min << '\n'
     << "skew_max = " << c.skew_max << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

inline std::string to_key_values(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "gamma = " << c.gamma << '\n'
     << "gae_lambda = " << c.gae_lambda << '\n'
     << "clip_epsilon = " << c.clip_epsilon << '\n'
     << "clip_decay = " << (c.clip_decay ? "true" : "false") << '\n'
     << "learning_rate = " << c.learning_rate << '\n'
     << "value_coef = " << c.value_coef << '\n'
     << "entropy_coef = " << c.entropy_coef << '\n'
     << "invalid_lambda = " << c.invalid_lambda << '\n'
     << "max_grad_norm = " << c.max_grad_norm << '\n'
     << "rollout_length = " << c.rollout_length << '\n'
     << "n_envs = " << c.n_envs << '\n'
     << "epochs_per_update = " << c.epochs_per_update << '\n'
     << "minibatch_size = " << c.minibatch_size << '\n'
     << "total_steps = " << c.total_steps << '\n'
     << "eval_interval = " << c.eval_interval << '\n'
     << "eval_episodes = " << c.eval_episodes << '\n'
     << "hidden = ";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) os << (i ? "," : "") << c.hidden[i];
  os << '\n'
     << "seed = " << c.seed << '\n'
     << "masking_mode = " << (c.masking_mode == MaskingMode::masked ? "masked" : "unmasked_fallback") << '\n';
  return os.str();
}

}  // namespace petrirl
