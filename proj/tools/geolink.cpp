// SPDX-License-Identifier: Apache-2.0
//
// geolink command line: data generation, training, 2D-only evaluation and
// feature export, checkpoint stripping and ablation sweeps.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "geolink/ablation.hpp"
#include "geolink/error.hpp"
#include "geolink/trainer.hpp"

namespace fs = std::filesystem;
using namespace geolink;

namespace {

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      ks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, "bad K value '" + item + "'");
    }
  }
  require(!ks.empty(), ErrorCode::ConfigError, "empty K list");
  return ks;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_run_json(const fs::path& dir, const std::string& command, const TrainConfig& cfg,
                    const nlohmann::json& metrics) {
  fs::create_directories(dir);
  nlohmann::json run;
  run["command"] = command;
  run["config"] = to_json(cfg);
  run["config_hash"] = cfg.hash_hex();
  run["seed"] = cfg.seed;
  run["version"] = version();
  run["metrics"] = metrics;
  write_json(dir / "run.json", run);
}

syn::Dataset dataset_or_generate(const std::string& dir, std::uint64_t seed, int scenes, const syn::DomainStyle& style,
                                 const TrainConfig& cfg) {
  if (!dir.empty()) return syn::load_dataset(dir, {}, cfg.num_points);
  syn::GeneratorConfig g;
  g.image_side = cfg.image_side;
  g.num_points = cfg.num_points;
  return syn::generate_dataset(seed, scenes, style, g);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GeoLink: 3D-aware cross-view geo-localization training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Render a synthetic cross-view dataset");
  std::uint64_t gen_seed = 0;
  int gen_scenes = 64;
  int gen_views = 4;
  int gen_side = 32;
  int gen_points = 1024;
  double gen_train = 1.0;
  std::string gen_style = "source";
  std::string gen_out;
  bool gen_png = false;
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--scenes", gen_scenes, "Number of scenes")->check(CLI::Range(2, 1000000));
  gen->add_option("--views", gen_views, "Drone views per scene")->check(CLI::PositiveNumber);
  gen->add_option("--side", gen_side, "Image side in pixels")->check(CLI::PositiveNumber);
  gen->add_option("--points", gen_points, "Points per cloud")->check(CLI::PositiveNumber);
  gen->add_option("--train-fraction", gen_train, "Leading fraction of scenes labelled train")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--style", gen_style, "Appearance domain")->check(CLI::IsMember({"source", "target"}));
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_flag("--png", gen_png, "Write 8-bit PNG instead of raw float tensors");

  // train
  auto* tr = app.add_subcommand("train", "Train on a dataset directory");
  std::string tr_config, tr_data, tr_out, tr_resume, tr_eval_data;
  std::int64_t tr_stop = -1;
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--resume", tr_resume, "Checkpoint to resume from");
  tr->add_option("--stop-at", tr_stop, "Stop after this global step (for staged runs)");
  tr->add_option("--eval-data", tr_eval_data, "Dataset evaluated after training");

  // eval
  auto* ev = app.add_subcommand("eval", "2D-only retrieval evaluation");
  std::string ev_ckpt, ev_data, ev_dir = "d2s", ev_k = "1,5,10", ev_out;
  std::vector<std::string> ev_splits;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--direction", ev_dir, "d2s or s2d")->check(CLI::IsMember({"d2s", "s2d"}));
  ev->add_option("--k", ev_k, "Comma-separated K list");
  ev->add_option("--split", ev_splits, "Manifest splits to evaluate (default: all)");
  ev->add_option("--out", ev_out, "Directory for result.json and run.json");

  // encode
  auto* enc = app.add_subcommand("encode", "Export 2D features for images");
  std::string enc_ckpt, enc_out, enc_view = "drone";
  std::vector<std::string> enc_images;
  enc->add_option("--ckpt", enc_ckpt, "Checkpoint")->required();
  enc->add_option("--images", enc_images, "Image files (.png/.rt) or directories")->required();
  enc->add_option("--view", enc_view, "drone or satellite")->check(CLI::IsMember({"drone", "satellite"}));
  enc->add_option("--out", enc_out, "Output raw tensor (N x D float64)")->required();

  // strip
  auto* st = app.add_subcommand("strip", "Remove 3D-branch tensors from a checkpoint");
  std::string st_ckpt, st_out;
  st->add_option("--ckpt", st_ckpt, "Input checkpoint")->required();
  st->add_option("--out", st_out, "Output checkpoint")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Cross-domain ablation or sensitivity sweep");
  std::string ab_config, ab_grid = "sensitivity", ab_out = "ablation", ab_src_dir, ab_tgt_dir;
  std::uint64_t ab_src_seed = 1, ab_tgt_seed = 2;
  int ab_src_scenes = 64, ab_tgt_scenes = 32, ab_seeds = 1;
  ab->add_option("--config", ab_config, "Base config file");
  ab->add_option("--grid", ab_grid, "sensitivity or components")->check(CLI::IsMember({"sensitivity", "components"}));
  ab->add_option("--source-data", ab_src_dir, "Source dataset directory (generated when omitted)");
  ab->add_option("--target-data", ab_tgt_dir, "Target dataset directory (generated when omitted)");
  ab->add_option("--source-seed", ab_src_seed, "Source generator seed");
  ab->add_option("--target-seed", ab_tgt_seed, "Target generator seed");
  ab->add_option("--source-scenes", ab_src_scenes, "Generated source scenes");
  ab->add_option("--target-scenes", ab_tgt_scenes, "Generated target scenes");
  ab->add_option("--seeds", ab_seeds, "Training seeds per grid point")->check(CLI::PositiveNumber);
  ab->add_option("--out", ab_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      syn::GeneratorConfig g;
      g.image_side = gen_side;
      g.drone_views = gen_views;
      g.num_points = gen_points;
      const auto style = gen_style == "target" ? syn::DomainStyle::target() : syn::DomainStyle::source();
      const syn::Dataset ds = syn::generate_dataset(gen_seed, gen_scenes, style, g, gen_train);
      syn::save_dataset(gen_out, ds, gen_png);
      std::printf("wrote %d scenes (%s style) to %s\n", gen_scenes, gen_style.c_str(), gen_out.c_str());
      return 0;
    }

    if (*tr) {
      std::vector<std::string> warnings;
      std::unique_ptr<Trainer> trainer;
      TrainConfig cfg = tr_config.empty() ? TrainConfig{} : load_config(tr_config);
      if (!tr_resume.empty()) {
        Checkpoint ck = load_checkpoint(tr_resume);
        cfg = ck.model.cfg;
        trainer = std::make_unique<Trainer>(std::move(ck), syn::load_dataset(tr_data, {}, cfg.num_points, &warnings));
      } else {
        trainer = std::make_unique<Trainer>(cfg, syn::load_dataset(tr_data, {}, cfg.num_points, &warnings));
      }
      for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      fs::create_directories(tr_out);
      const auto until = tr_stop >= 0 ? std::optional<std::int64_t>(tr_stop) : std::nullopt;
      const auto history = trainer->run(until, [&](const StepRecord& r) {
        if (r.step % 50 == 0) {
          std::printf("step %lld lr %.3g L_total %.4f (cc %.4f sc %.4f ga %.4f rd %.4f) tau %.4f\n",
                      static_cast<long long>(r.step), r.lr, r.loss.total, r.loss.cc, r.loss.sc, r.loss.ga, r.loss.rd,
                      r.loss.tau);
        }
      });
      write_loss_csv(fs::path(tr_out) / "loss.csv", history);
      save_checkpoint(fs::path(tr_out) / "checkpoint.bin", trainer->checkpoint());
      nlohmann::json metrics;
      metrics["steps"] = trainer->step();
      metrics["total_steps"] = trainer->total_steps();
      if (!history.empty()) metrics["final_loss"] = history.back().loss.total;
      if (!tr_eval_data.empty()) {
        const syn::Dataset ed = syn::load_dataset(tr_eval_data, {}, cfg.num_points);
        for (auto dir : {ret::Direction::DroneToSatellite, ret::Direction::SatelliteToDrone}) {
          metrics[ret::to_string(dir)] = result_json(evaluate(trainer->model(), ed, dir, {1, 5, 10}));
        }
      }
      write_run_json(tr_out, "train", trainer->config(), metrics);
      std::printf("trained to step %lld; checkpoint in %s\n", static_cast<long long>(trainer->step()), tr_out.c_str());
      return 0;
    }

    if (*ev) {
      const Checkpoint ck = load_checkpoint(ev_ckpt);
      const std::uint64_t pc_before = pc::invocation_count();
      const std::uint64_t mme_before = mme::invocation_count();
      const syn::Dataset ds = syn::load_dataset(ev_data, ev_splits, ck.model.cfg.num_points);
      const auto dir = ret::parse_direction(ev_dir);
      const ret::RetrievalResult r = evaluate(ck.model, ds, dir, parse_ks(ev_k), ev_splits);
      std::printf("%s\n", ret::to_json(r, ck.model.cfg.hash_hex()).c_str());
      std::printf("pointcloud_encoder_invocations=%llu mme_invocations=%llu\n",
                  static_cast<unsigned long long>(pc::invocation_count() - pc_before),
                  static_cast<unsigned long long>(mme::invocation_count() - mme_before));
      if (!ev_out.empty()) {
        fs::create_directories(ev_out);
        write_json(fs::path(ev_out) / "result.json", nlohmann::json::parse(ret::to_json(r, ck.model.cfg.hash_hex())));
        write_run_json(ev_out, "eval", ck.model.cfg, result_json(r));
      }
      return 0;
    }

    if (*enc) {
      const Checkpoint ck = load_checkpoint(enc_ckpt);
      std::vector<Image> images;
      for (const auto& p : enc_images) {
        if (fs::is_directory(p)) {
          std::vector<fs::path> files;
          for (const auto& e : fs::directory_iterator(p)) {
            const auto ext = e.path().extension();
            if (ext == ".png" || ext == ".rt") files.push_back(e.path());
          }
          std::sort(files.begin(), files.end());
          for (const auto& f : files) images.push_back(read_image(f));
        } else {
          images.push_back(read_image(p));
        }
      }
      require(!images.empty(), ErrorCode::EmptySplit, "no images to encode");
      std::vector<const Image*> ptrs;
      for (const auto& im : images) ptrs.push_back(&im);
      const ag::Mat f = encode_image_list(ck.model, ptrs, enc_view == "drone" ? ViewTag::Drone : ViewTag::Satellite);
      write_matrix_rt(enc_out, f);
      std::printf("wrote %lld x %lld features to %s\n", static_cast<long long>(f.rows()), static_cast<long long>(f.cols()),
                  enc_out.c_str());
      return 0;
    }

    if (*st) {
      save_checkpoint(st_out, strip_3d(load_checkpoint(st_ckpt)));
      std::printf("wrote stripped checkpoint %s\n", st_out.c_str());
      return 0;
    }

    if (*ab) {
      const TrainConfig base = ab_config.empty() ? TrainConfig{} : load_config(ab_config);
      const syn::Dataset source =
          dataset_or_generate(ab_src_dir, ab_src_seed, ab_src_scenes, syn::DomainStyle::source(), base);
      const syn::Dataset target =
          dataset_or_generate(ab_tgt_dir, ab_tgt_seed, ab_tgt_scenes, syn::DomainStyle::target(), base);
      const auto points = ab_grid == "components" ? component_grid() : sensitivity_grid();
      std::vector<CrossDomainResult> results;
      fs::create_directories(ab_out);
      for (const auto& p : points) {
        std::vector<ret::RetrievalResult> d2s, s2d;
        CrossDomainResult last;
        for (int s = 0; s < ab_seeds; ++s) {
          TrainConfig cfg = apply_sweep_point(base, p);
          cfg.seed = base.seed + static_cast<std::uint64_t>(s);
          last = run_cross_domain(p.param + "=" + p.value, cfg, source, target);
          if (ab_seeds > 1) {
            std::printf("  seed %llu: d2s R@1 %.4f AP %.4f\n", static_cast<unsigned long long>(cfg.seed),
                        last.d2s.recall_at.begin()->second, last.d2s.mean_ap);
          }
          d2s.push_back(last.d2s);
          s2d.push_back(last.s2d);
        }
        last.d2s = ret::average_results(d2s);
        last.s2d = ret::average_results(s2d);
        std::printf("%-14s %-8s d2s R@1 %.4f AP %.4f | s2d R@1 %.4f AP %.4f\n", p.param.c_str(), p.value.c_str(),
                    last.d2s.recall_at.begin()->second, last.d2s.mean_ap, last.s2d.recall_at.begin()->second,
                    last.s2d.mean_ap);
        results.push_back(std::move(last));
      }
      const nlohmann::json report = ranked_report(ab_grid, points, results);
      validate_report(report);
      write_json(fs::path(ab_out) / "report.json", report);
      write_run_json(ab_out, "ablate --grid " + ab_grid, base, report);
      std::printf("ranked report: %s\n", (fs::path(ab_out) / "report.json").c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
