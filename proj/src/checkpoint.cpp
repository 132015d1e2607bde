// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>

#include "geolink/error.hpp"
#include "geolink/trainer.hpp"

namespace geolink {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'G', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct Tensor {
  std::string name;
  ag::Mat value;
};

void collect_slots(const nn::AdamW& opt, const std::string& prefix, std::vector<Tensor>& out) {
  for (const auto& [name, slot] : opt.slots()) {
    out.push_back({prefix + name + "/m", slot.m});
    out.push_back({prefix + name + "/v", slot.v});
  }
}

bool is_3d_name(const std::string& name) {
  for (const char* p : {"mme/", "proj/", "est_d/", "est_s/", "pc_stats/"}) {
    if (name.find(p) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  std::vector<Tensor> tensors;
  const nn::ParameterSet params = ckpt.model.all_params();
  for (const auto& [name, var] : params.entries()) tensors.push_back({name, var.value()});
  if (ckpt.model.has_3d) {
    tensors.push_back({"pc_stats/mean", ckpt.model.pc_mean});
    tensors.push_back({"pc_stats/std", ckpt.model.pc_std});
  }
  collect_slots(ckpt.opt.main, "opt/main/", tensors);
  collect_slots(ckpt.opt.est, "opt/est/", tensors);

  nlohmann::json header;
  header["format"] = "geolink-checkpoint";
  header["config"] = to_json(ckpt.model.cfg);
  header["step"] = ckpt.step;
  header["has_3d"] = ckpt.model.has_3d;
  header["opt_main_steps"] = ckpt.opt.main.step_count();
  header["opt_est_steps"] = ckpt.opt.est.step_count();
  header["version"] = version();
  header["tensors"] = nlohmann::json::array();
  for (const Tensor& t : tensors) header["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor& t : tensors) {
    // Row-major payload.
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
        const double v = t.value(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
  }
  require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorCode::ParseError, path.string() + ": byte 0: bad checkpoint magic");
  std::uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (!in || ver != kVersion) fail(ErrorCode::ParseError, path.string() + ": byte 4: unsupported checkpoint version");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 30)) fail(ErrorCode::ParseError, path.string() + ": byte 8: bad header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorCode::ParseError, path.string() + ": byte 16: header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, path.string() + ": byte " + std::to_string(16 + e.byte) + ": " + e.what());
  }

  std::map<std::string, ag::Mat> tensors;
  std::size_t offset = 16 + len;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    ag::Mat m(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        in.read(reinterpret_cast<char*>(&m(i, j)), sizeof(double));
        if (!in) fail(ErrorCode::ParseError, path.string() + ": byte " + std::to_string(offset) + ": payload truncated in " + name);
        offset += sizeof(double);
      }
    }
    tensors.emplace(name, std::move(m));
  }

  Checkpoint ckpt;
  ckpt.model = init_model(config_from_json(header.at("config")));
  ckpt.model.has_3d = header.at("has_3d").get<bool>();
  ckpt.step = header.at("step").get<std::int64_t>();
  const nn::ParameterSet params = ckpt.model.all_params();
  for (const auto& [name, var] : params.entries()) {
    auto it = tensors.find(name);
    require(it != tensors.end(), ErrorCode::ParseError, path.string() + ": missing tensor " + name);
    require(it->second.rows() == var.rows() && it->second.cols() == var.cols(), ErrorCode::ParseError,
            path.string() + ": shape mismatch for " + name);
    var.node()->value = it->second;
  }
  if (ckpt.model.has_3d) {
    ckpt.model.pc_mean = tensors.at("pc_stats/mean");
    ckpt.model.pc_std = tensors.at("pc_stats/std");
  }
  nn::AdamWConfig ac;
  ac.weight_decay = ckpt.model.cfg.weight_decay;
  ckpt.opt.main = nn::AdamW(ac);
  ckpt.opt.est = nn::AdamW(ac);
  ckpt.opt.main.set_step_count(header.at("opt_main_steps").get<std::int64_t>());
  ckpt.opt.est.set_step_count(header.at("opt_est_steps").get<std::int64_t>());
  for (auto& [name, m] : tensors) {
    for (auto [prefix, opt] : {std::pair<std::string, nn::AdamW*>{"opt/main/", &ckpt.opt.main},
                               std::pair<std::string, nn::AdamW*>{"opt/est/", &ckpt.opt.est}}) {
      if (name.rfind(prefix, 0) != 0) continue;
      const std::string rest = name.substr(prefix.size());
      const std::string pname = rest.substr(0, rest.size() - 2);
      auto& slot = opt->mutable_slots()[pname];
      (rest.back() == 'm' ? slot.m : slot.v) = m;
    }
  }
  return ckpt;
}

Checkpoint strip_3d(const Checkpoint& ckpt) {
  Checkpoint out;
  out.model = init_model(ckpt.model.cfg);
  out.model.has_3d = false;
  const nn::ParameterSet from = ckpt.model.all_params();
  const nn::ParameterSet to = out.model.all_params();
  for (const auto& [name, var] : to.entries()) var.node()->value = from.get(name).value();
  out.step = ckpt.step;
  out.opt = ckpt.opt;
  for (nn::AdamW* opt : {&out.opt.main, &out.opt.est}) {
    auto& slots = opt->mutable_slots();
    for (auto it = slots.begin(); it != slots.end();) {
      it = is_3d_name(it->first) ? slots.erase(it) : std::next(it);
    }
  }
  out.opt.est.set_step_count(0);
  return out;
}

}  // namespace geolink
