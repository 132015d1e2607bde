// SPDX-License-Identifier: Apache-2.0
#include "geolink/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include "geolink/error.hpp"

#ifndef GEOLINK_VERSION
#define GEOLINK_VERSION "unknown"
#endif

namespace geolink {

namespace {

using Field = std::variant<int*, double*, bool*, std::uint64_t*>;

std::vector<std::pair<const char*, Field>> fields(TrainConfig& c) {
  return {
      {"epochs", &c.epochs},
      {"batch_size", &c.batch_size},
      {"base_lr", &c.base_lr},
      {"final_lr", &c.final_lr},
      {"warmup_fraction", &c.warmup_fraction},
      {"weight_decay", &c.weight_decay},
      {"grad_clip", &c.grad_clip},
      {"seed", &c.seed},
      {"lambda_sc", &c.lambda_sc},
      {"init_tau", &c.init_tau},
      {"ga", &c.ga},
      {"sc", &c.sc},
      {"rd", &c.rd},
      {"mme", &c.mme},
      {"symmetric_nce", &c.symmetric_nce},
      {"rd_teacher_grad", &c.rd_teacher_grad},
      {"estimator_first", &c.estimator_first},
      {"multi_view_average", &c.multi_view_average},
      {"feature_dim", &c.feature_dim},
      {"experts", &c.experts},
      {"vclub_hidden", &c.vclub_hidden},
      {"image_side", &c.image_side},
      {"patch", &c.patch},
      {"width", &c.width},
      {"token_hidden", &c.token_hidden},
      {"channel_hidden", &c.channel_hidden},
      {"mixer_blocks", &c.mixer_blocks},
      {"num_points", &c.num_points},
      {"pc_stages", &c.pc_stages},
      {"pc_k", &c.pc_k},
      {"pc_initial_dim", &c.pc_initial_dim},
      {"pc_alpha", &c.pc_alpha},
      {"pc_beta", &c.pc_beta},
      {"pc_random_start", &c.pc_random_start},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorCode::ConfigError,
          "bad value '" + v + "' for " + key);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == v.size() && !v.empty(), ErrorCode::ConfigError, "bad value '" + v + "' for " + key);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (auto& [name, field] : fields(*this)) {
    if (key != name) continue;
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1" || value == "on") {
              *p = true;
            } else if (value == "false" || value == "0" || value == "off") {
              *p = false;
            } else {
              fail(ErrorCode::ConfigError, "bad boolean '" + value + "' for " + key);
            }
          } else if constexpr (std::is_same_v<T, double>) {
            *p = parse_double(key, value);
          } else {
            *p = parse_number<T>(key, value);
          }
        },
        field);
    return;
  }
  fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  check(epochs >= 0, "epochs must be >= 0");
  check(batch_size >= 2, "batch_size must be >= 2");
  check(base_lr > final_lr && final_lr > 0.0, "need base_lr > final_lr > 0");
  check(warmup_fraction >= 0.0, "warmup_fraction must be >= 0");
  check(weight_decay >= 0.0, "weight_decay must be >= 0");
  check(grad_clip >= 0.0, "grad_clip must be >= 0");
  check(lambda_sc >= 0.0, "lambda_sc must be >= 0");
  check(init_tau > 0.0, "init_tau must be > 0");
  check(feature_dim >= 2, "feature_dim must be >= 2");
  check(experts >= 1, "experts must be >= 1");
  check(feature_dim % (experts + 1) == 0, "feature_dim must be divisible by experts + 1");
  check(vclub_hidden >= 1, "vclub_hidden must be >= 1");
  check(patch >= 1 && image_side % patch == 0, "image_side must be divisible by patch");
  check(width >= 1 && token_hidden >= 1 && channel_hidden >= 1 && mixer_blocks >= 0, "bad image encoder widths");
  check(pc_stages >= 1 && pc_k >= 1, "pc_stages and pc_k must be >= 1");
  check(pc_initial_dim >= 6 && pc_initial_dim % 6 == 0, "pc_initial_dim must be a positive multiple of 6");
  check(pc_stages < 30 && num_points >= (1 << pc_stages), "num_points must be >= 2^pc_stages");
}

std::string to_config_text(const TrainConfig& cfg) {
  TrainConfig copy = cfg;
  std::ostringstream os;
  for (auto& [name, field] : fields(copy)) {
    os << name << " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, bool>) {
            os << (*p ? "true" : "false");
          } else if constexpr (std::is_same_v<T, double>) {
            os << format_double(*p);
          } else {
            os << *p;
          }
        },
        field);
    os << '\n';
  }
  return os.str();
}

std::uint64_t TrainConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_config_text(*this)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string TrainConfig::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError, origin + ": line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, origin + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::ConfigError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

nlohmann::json to_json(const TrainConfig& cfg) {
  TrainConfig copy = cfg;
  nlohmann::json j = nlohmann::json::object();
  for (auto& [name, field] : fields(copy)) {
    std::visit([&](auto* p) { j[name] = *p; }, field);
  }
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  for (auto& [name, field] : fields(cfg)) {
    if (!j.contains(name)) continue;
    std::visit([&](auto* p) { *p = j.at(name).get<std::remove_pointer_t<decltype(p)>>(); }, field);
  }
  return cfg;
}

std::string version() { return GEOLINK_VERSION; }

}  // namespace geolink
