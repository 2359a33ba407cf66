// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace av2v {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + value + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(parse_int(key, trim(item))));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("key '" + key + "' given more than once");
    }

    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "base_channels") cfg.base_channels = static_cast<int>(parse_int(key, value));
    else if (key == "depth") cfg.depth = static_cast<int>(parse_int(key, value));
    else if (key == "decoder_layers") cfg.decoder_layers = static_cast<int>(parse_int(key, value));
    else if (key == "head_dim") cfg.head_dim = static_cast<int>(parse_int(key, value));
    else if (key == "num_heads") cfg.num_heads = static_cast<int>(parse_int(key, value));
    else if (key == "text_embed_dim") cfg.text_embed_dim = static_cast<int>(parse_int(key, value));
    else if (key == "frames_nominal") cfg.frames_nominal = static_cast<int>(parse_int(key, value));
    else if (key == "patch") cfg.patch = static_cast<int>(parse_int(key, value));
    else if (key == "t_train") cfg.t_train = static_cast<int>(parse_int(key, value));
    else if (key == "beta_start") cfg.beta_start = parse_double(key, value);
    else if (key == "beta_end") cfg.beta_end = parse_double(key, value);
    else if (key == "steps") cfg.steps = static_cast<int>(parse_int(key, value));
    else if (key == "l1") cfg.l1 = parse_int_list(key, value);
    else if (key == "l2") cfg.l2 = parse_int_list(key, value);
    else if (key == "l3") cfg.l3 = parse_int_list(key, value);
    else if (key == "tau_conv") cfg.tau_conv = parse_double(key, value);
    else if (key == "tau_sa") cfg.tau_sa = parse_double(key, value);
    else if (key == "tau_ta") cfg.tau_ta = parse_double(key, value);
    else if (key == "guidance_scale") cfg.guidance_scale = parse_double(key, value);
    else if (key == "t_prime_fraction") cfg.t_prime_fraction = parse_double(key, value);
    else if (key == "negative_prompt") cfg.negative_prompt = value;
    else if (key == "frames") cfg.frames = value;
    else if (key == "out") cfg.out = value;
    else if (key == "ladder") cfg.ladder = value;
    else if (key == "edited_first_frame") cfg.edited_first_frame = value;
    else if (key == "prompt") cfg.prompt = value;
    else throw ConfigError("unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "base_channels = " << base_channels << "\n";
  os << "depth = " << depth << "\n";
  os << "decoder_layers = " << decoder_layers << "\n";
  os << "head_dim = " << head_dim << "\n";
  os << "num_heads = " << num_heads << "\n";
  os << "text_embed_dim = " << text_embed_dim << "\n";
  os << "frames_nominal = " << frames_nominal << "\n";
  os << "patch = " << patch << "\n";
  os << "t_train = " << t_train << "\n";
  os << "beta_start = " << format_double(beta_start) << "\n";
  os << "beta_end = " << format_double(beta_end) << "\n";
  os << "steps = " << steps << "\n";
  os << "l1 = " << format_int_list(l1) << "\n";
  os << "l2 = " << format_int_list(l2) << "\n";
  os << "l3 = " << format_int_list(l3) << "\n";
  os << "tau_conv = " << format_double(tau_conv) << "\n";
  os << "tau_sa = " << format_double(tau_sa) << "\n";
  os << "tau_ta = " << format_double(tau_ta) << "\n";
  os << "guidance_scale = " << format_double(guidance_scale) << "\n";
  os << "t_prime_fraction = " << format_double(t_prime_fraction) << "\n";
  os << "negative_prompt = " << negative_prompt << "\n";
  os << "frames = " << frames << "\n";
  os << "out = " << out << "\n";
  os << "ladder = " << ladder << "\n";
  os << "edited_first_frame = " << edited_first_frame << "\n";
  os << "prompt = " << prompt << "\n";
  return os.str();
}

void RunConfig::validate() const {
  if (patch < 1) throw ConfigError("key 'patch': must be >= 1");
  UNetConfig uc = unet_config();
  uc.validate();
  if (steps < 1 || steps > t_train) {
    throw ConfigError("key 'steps': requires 1 <= steps <= t_train");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("keys 'beta_start'/'beta_end': need 0 < beta_start <= beta_end < 1");
  }
  if (!(guidance_scale >= 1.0)) throw ConfigError("key 'guidance_scale': must be >= 1");
  if (!(t_prime_fraction > 0.0 && t_prime_fraction <= 1.0)) {
    throw ConfigError("key 't_prime_fraction': must lie in (0, 1]");
  }
  InjectionPlan p = plan();
  try {
    p.validate(decoder_layers);
  } catch (const PlanError& e) {
    throw ConfigError(std::string("keys 'l1'/'l2'/'l3'/'tau_*': ") + e.what());
  }
}

UNetConfig RunConfig::unet_config() const {
  UNetConfig uc;
  uc.in_channels = latent_channels();
  uc.base_channels = base_channels;
  uc.depth = depth;
  uc.decoder_layer_count = decoder_layers;
  uc.frames_nominal = frames_nominal;
  uc.head_dim = head_dim;
  uc.num_heads = num_heads;
  uc.text_embed_dim = text_embed_dim;
  uc.seed = seed;
  return uc;
}

InjectionPlan RunConfig::plan() const {
  InjectionPlan p;
  p.conv_layers = std::set<int>(l1.begin(), l1.end());
  p.spatial_layers = std::set<int>(l2.begin(), l2.end());
  p.temporal_layers = std::set<int>(l3.begin(), l3.end());
  p.tau_conv = tau_conv;
  p.tau_sa = tau_sa;
  p.tau_ta = tau_ta;
  p.total_steps = steps;
  return p;
}

}  // namespace av2v
