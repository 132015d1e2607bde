// SPDX-License-Identifier: Apache-2.0
#include "geolink/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "geolink/error.hpp"

namespace geolink {

pc::EncoderConfig encoder_config(const TrainConfig& cfg) {
  pc::EncoderConfig e;
  e.num_stages = cfg.pc_stages;
  e.k_neighbors = cfg.pc_k;
  e.initial_dim = cfg.pc_initial_dim;
  e.pose_alpha = cfg.pc_alpha;
  e.pose_beta = cfg.pc_beta;
  e.num_points = cfg.num_points;
  e.random_start = cfg.pc_random_start;
  e.start_seed = nn::mix_seed(cfg.seed, 11);
  return e;
}

obj::LossConfig loss_config(const TrainConfig& cfg) {
  obj::LossConfig l;
  l.lambda_sc = cfg.lambda_sc;
  l.init_tau = cfg.init_tau;
  l.enable_sc = cfg.sc;
  l.enable_ga = cfg.ga;
  l.enable_rd = cfg.rd;
  l.symmetric_nce = cfg.symmetric_nce;
  l.rd_teacher_grad = cfg.rd_teacher_grad;
  return l;
}

img::ImageEncoderConfig image_config(const TrainConfig& cfg) {
  img::ImageEncoderConfig c;
  c.image_side = cfg.image_side;
  c.patch = cfg.patch;
  c.width = cfg.width;
  c.token_hidden = cfg.token_hidden;
  c.channel_hidden = cfg.channel_hidden;
  c.blocks = cfg.mixer_blocks;
  c.out_dim = cfg.feature_dim;
  c.seed = nn::mix_seed(cfg.seed, 1);
  return c;
}

nn::ParameterSet Model::main_params() const {
  nn::ParameterSet set;
  image.register_params(set, "image/");
  if (has_3d) {
    if (cfg.mme) mme.register_params(set, "mme/");
    set.add("proj/w", proj_w);
    set.add("proj/b", proj_b);
  }
  set.add("log_tau", temperature.log_tau);
  return set;
}

nn::ParameterSet Model::estimator_params() const {
  nn::ParameterSet set;
  if (has_3d) {
    est_d.register_params(set, "est_d/");
    est_s.register_params(set, "est_s/");
  }
  return set;
}

nn::ParameterSet Model::all_params() const {
  nn::ParameterSet set = main_params();
  set.extend(estimator_params());
  return set;
}

Model init_model(const TrainConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.image = img::init_image_encoder(image_config(cfg));
  const int d_pc = encoder_config(cfg).output_dim();
  const int d = cfg.feature_dim;
  mme::MMEConfig mc;
  mc.input_dim = d_pc;
  mc.output_dim = d;
  mc.experts = cfg.experts;
  mc.seed = nn::mix_seed(cfg.seed, 2);
  m.mme = mme::init_mme(mc);
  std::mt19937_64 rng(nn::mix_seed(cfg.seed, 3));
  const int proj_in = cfg.mme ? d : d_pc;
  m.proj_w = ag::parameter(nn::fan_in_uniform(proj_in, d, rng));
  m.proj_b = ag::parameter(ag::Mat::Zero(1, d));
  m.temperature = obj::Temperature::init(cfg.init_tau);
  m.est_d = obj::VClubEstimator::init(d, cfg.vclub_hidden, d, nn::mix_seed(cfg.seed, 4));
  m.est_s = obj::VClubEstimator::init(d, cfg.vclub_hidden, d, nn::mix_seed(cfg.seed, 5));
  m.pc_mean = ag::Mat::Zero(1, d_pc);
  m.pc_std = ag::Mat::Ones(1, d_pc);
  return m;
}

FeatureBatch pointcloud_features(const Model& m, const ag::Mat& raw, std::vector<std::string> scene_ids) {
  require(m.has_3d, ErrorCode::ConfigError, "model has no 3D branch");
  require(raw.cols() == m.pc_mean.cols(), ErrorCode::DimMismatch,
          "point-cloud feature width " + std::to_string(raw.cols()) + " != " + std::to_string(m.pc_mean.cols()));
  const ag::Mat z = (raw.rowwise() - m.pc_mean.row(0)).array().rowwise() / m.pc_std.row(0).array();
  ag::Var x = ag::constant(z);
  if (m.cfg.mme) x = mme::mme_forward(m.mme, x);
  const ag::Var f = nn::linear(x, m.proj_w, m.proj_b);
  return l2_normalize(FeatureBatch{f, ViewTag::PointCloud, std::move(scene_ids)});
}

FeatureBatch image_features(const Model& m, const img::ImageBatch& batch) {
  return l2_normalize(img::encode_images(m.image, batch));
}

const Eigen::VectorXd& PointCloudCache::get(const pc::PointCloud& cloud, const pc::EncoderConfig& cfg) {
  const auto key = std::make_pair(cloud.scene_id, cfg.hash());
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, pc::encode_pointcloud(cloud, cfg)).first;
  return it->second;
}

namespace {

Model clone(const Model& src) {
  Model m = init_model(src.cfg);
  m.has_3d = src.has_3d;
  m.pc_mean = src.pc_mean;
  m.pc_std = src.pc_std;
  const nn::ParameterSet from = src.all_params();
  const nn::ParameterSet to = m.all_params();
  for (const auto& [name, var] : from.entries()) to.get(name).node()->value = var.value();
  return m;
}

nn::AdamWConfig adamw_config(const TrainConfig& cfg) {
  nn::AdamWConfig a;
  a.weight_decay = cfg.weight_decay;
  return a;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, syn::Dataset data)
    : cfg_(cfg),
      model_(init_model(cfg)),
      opt_{nn::AdamW(adamw_config(cfg)), nn::AdamW(adamw_config(cfg))},
      data_(std::move(data)) {
  setup(true);
}

Trainer::Trainer(Checkpoint ckpt, syn::Dataset data)
    : cfg_(ckpt.model.cfg),
      model_(std::move(ckpt.model)),
      opt_(std::move(ckpt.opt)),
      step_(ckpt.step),
      data_(std::move(data)) {
  require(model_.has_3d, ErrorCode::ConfigError, "cannot resume training from a stripped checkpoint");
  setup(false);
}

void Trainer::setup(bool compute_stats) {
  cfg_.validate();
  for (const auto& t : data_.scenes) {
    auto it = data_.splits.find(t.scene_id);
    if (it == data_.splits.end() || it->second == "train") train_.push_back(&t);
  }
  require(!train_.empty(), ErrorCode::EmptySplit, "no training scenes");
  const int n = static_cast<int>(train_.size());
  steps_per_epoch_ = n / cfg_.batch_size;
  require(cfg_.epochs == 0 || steps_per_epoch_ >= 1, ErrorCode::ConfigError,
          "batch_size " + std::to_string(cfg_.batch_size) + " exceeds the " + std::to_string(n) + " training scenes");

  const pc::EncoderConfig ecfg = encoder_config(cfg_);
  PointCloudCache cache;
  raw_pc_.resize(n, ecfg.output_dim());
  for (int i = 0; i < n; ++i) raw_pc_.row(i) = cache.get(train_[static_cast<std::size_t>(i)]->cloud, ecfg).transpose();
  if (compute_stats) {
    model_.pc_mean = raw_pc_.colwise().mean();
    const ag::Mat centered = raw_pc_.rowwise() - model_.pc_mean.row(0);
    ag::Mat var = centered.array().square().colwise().sum() / static_cast<double>(n);
    model_.pc_std = var.array().sqrt().unaryExpr([](double s) { return s > 1e-8 ? s : 1.0; });
  }
}

std::vector<int> Trainer::batch_indices(std::int64_t step) const {
  const std::int64_t epoch = step / steps_per_epoch_;
  const std::int64_t within = step % steps_per_epoch_;
  std::vector<int> perm(train_.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(nn::mix_seed(cfg_.seed, 0x1000000ULL + static_cast<std::uint64_t>(epoch)));
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto b = static_cast<std::size_t>(cfg_.batch_size);
  return {perm.begin() + static_cast<std::ptrdiff_t>(within * cfg_.batch_size),
          perm.begin() + static_cast<std::ptrdiff_t>(within * cfg_.batch_size + static_cast<std::int64_t>(b))};
}

StepRecord Trainer::train_step() {
  require(!done(), ErrorCode::ConfigError, "training already finished");
  const std::vector<int> idx = batch_indices(step_);
  const int b = static_cast<int>(idx.size());

  std::vector<std::string> ids;
  std::vector<const Image*> sat_imgs;
  std::vector<const Image*> dro_imgs;
  ag::Mat raw(b, raw_pc_.cols());
  std::mt19937_64 view_rng(nn::mix_seed(cfg_.seed, 0x2000000ULL + static_cast<std::uint64_t>(step_)));
  int views_per_scene = 1;
  for (int i = 0; i < b; ++i) {
    const syn::SceneTriplet& t = *train_[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    ids.push_back(t.scene_id);
    sat_imgs.push_back(&t.satellite);
    raw.row(i) = raw_pc_.row(idx[static_cast<std::size_t>(i)]);
    const int v = static_cast<int>(t.drone_images.size());
    if (cfg_.multi_view_average) {
      views_per_scene = v;
      require(i == 0 || static_cast<int>(dro_imgs.size()) == i * v, ErrorCode::ShapeError,
              "multi-view averaging needs equal drone view counts");
      for (const Image& im : t.drone_images) dro_imgs.push_back(&im);
    } else {
      dro_imgs.push_back(&t.drone_images[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, v - 1)(view_rng))]);
    }
  }

  const int side = cfg_.image_side;
  const FeatureBatch pcf = pointcloud_features(model_, raw, ids);
  const FeatureBatch sat = image_features(model_, img::make_batch(sat_imgs, side, ViewTag::Satellite, ids));
  FeatureBatch dro;
  if (views_per_scene > 1) {
    const FeatureBatch per_view = image_features(model_, img::make_batch(dro_imgs, side, ViewTag::Drone, {}));
    dro = l2_normalize(FeatureBatch{ag::block_mean_rows(per_view.values, views_per_scene), ViewTag::Drone, ids});
  } else {
    dro = image_features(model_, img::make_batch(dro_imgs, side, ViewTag::Drone, ids));
  }

  ScheduleConfig sched{cfg_.base_lr, cfg_.final_lr, cfg_.warmup_fraction, steps_per_epoch_};
  StepRecord rec;
  rec.step = step_;
  rec.epoch = static_cast<int>(step_ / steps_per_epoch_);
  rec.lr = lr_at(static_cast<int>(step_ + 1), static_cast<int>(total_steps()), sched);

  const nn::ParameterSet est_params = model_.estimator_params();
  auto estimator_step = [&] {
    if (!cfg_.ga) return;
    est_params.zero_grad();
    const ag::Var ll = ag::add(obj::vclub_loglik(model_.est_d, pcf, dro), obj::vclub_loglik(model_.est_s, pcf, sat));
    ag::backward(ag::scale(ll, -1.0));
    nn::clip_grad_norm(est_params, cfg_.grad_clip);
    opt_.est.step(est_params, rec.lr);
  };

  if (cfg_.estimator_first) estimator_step();

  const nn::ParameterSet main_params = model_.main_params();
  main_params.zero_grad();
  est_params.zero_grad();
  obj::LossTerms terms = obj::total_loss(dro, sat, pcf, model_.temperature, model_.est_d, model_.est_s, loss_config(cfg_));
  ag::backward(terms.total);
  rec.grad_norm = nn::clip_grad_norm(main_params, cfg_.grad_clip);
  opt_.main.step(main_params, rec.lr);
  rec.loss = terms.report;

  if (!cfg_.estimator_first) estimator_step();
  ++step_;
  return rec;
}

std::vector<StepRecord> Trainer::run(std::optional<std::int64_t> until,
                                     const std::function<void(const StepRecord&)>& on_step) {
  const std::int64_t end = std::min(total_steps(), until.value_or(total_steps()));
  std::vector<StepRecord> out;
  while (step_ < end) {
    out.push_back(train_step());
    if (on_step) on_step(out.back());
  }
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = clone(model_);
  c.opt = opt_;
  c.step = step_;
  return c;
}

TrainResult train(const TrainConfig& cfg, const syn::Dataset& data) {
  Trainer t(cfg, data);
  TrainResult r;
  r.history = t.run();
  r.checkpoint = t.checkpoint();
  return r;
}

ag::Mat encode_image_list(const Model& m, const std::vector<const Image*>& images, ViewTag view) {
  constexpr std::size_t kChunk = 64;
  ag::Mat out(static_cast<Eigen::Index>(images.size()), m.cfg.feature_dim);
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    const std::vector<const Image*> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                          images.begin() + static_cast<std::ptrdiff_t>(end));
    const FeatureBatch f = image_features(m, img::make_batch(chunk, m.cfg.image_side, view, {}));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = f.values.value();
  }
  return out;
}

ret::RetrievalResult evaluate(const Model& m, const std::vector<const syn::SceneTriplet*>& scenes, ret::Direction dir,
                              const std::vector<int>& ks) {
  require(!scenes.empty(), ErrorCode::EmptySplit, "evaluation split is empty");
  const std::uint64_t pc_before = pc::invocation_count();
  const std::uint64_t mme_before = mme::invocation_count();

  std::vector<const Image*> drones;
  std::vector<const Image*> sats;
  std::vector<std::vector<int>> drone_of_scene(scenes.size());
  std::vector<int> scene_of_drone;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    sats.push_back(&scenes[s]->satellite);
    for (const Image& im : scenes[s]->drone_images) {
      drone_of_scene[s].push_back(static_cast<int>(drones.size()));
      scene_of_drone.push_back(static_cast<int>(s));
      drones.push_back(&im);
    }
  }
  const ag::Mat fd = encode_image_list(m, drones, ViewTag::Drone);
  const ag::Mat fs = encode_image_list(m, sats, ViewTag::Satellite);

  ret::RetrievalResult r;
  if (dir == ret::Direction::DroneToSatellite) {
    ret::GroundTruth gt;
    for (int s : scene_of_drone) gt.push_back({s});
    r = ret::score(ret::similarity_matrix(fd, fs), gt, ks, dir);
  } else {
    r = ret::score(ret::similarity_matrix(fs, fd), drone_of_scene, ks, dir);
  }
  require(pc::invocation_count() == pc_before && mme::invocation_count() == mme_before, ErrorCode::ConfigError,
          "3D branch invoked during evaluation");
  return r;
}

ret::RetrievalResult evaluate(const Model& m, const syn::Dataset& data, ret::Direction dir, const std::vector<int>& ks,
                              const std::vector<std::string>& splits) {
  std::vector<const syn::SceneTriplet*> scenes;
  for (const auto& t : data.scenes) {
    auto it = data.splits.find(t.scene_id);
    const std::string split = it == data.splits.end() ? "train" : it->second;
    if (splits.empty() || std::find(splits.begin(), splits.end(), split) != splits.end()) scenes.push_back(&t);
  }
  return evaluate(m, scenes, dir, ks);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << "step,epoch,lr,L_cc,L_sc,L_ga,L_rd,L_total,tau,nce_dro_pc,nce_sat_pc,grad_norm\n";
  char buf[512];
  for (const StepRecord& r : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.step), r.epoch, r.lr, r.loss.cc, r.loss.sc, r.loss.ga, r.loss.rd,
                  r.loss.total, r.loss.tau, r.loss.nce_dro_pc, r.loss.nce_sat_pc, r.grad_norm);
    out << buf;
  }
}

std::vector<AblationVariant> standard_variants() {
  return {
      {"baseline", false, false, false, false},
      {"baseline+mme", true, false, false, false},
      {"+sc", true, true, false, false},
      {"+sc+ga", true, true, true, false},
      {"full", true, true, true, true},
  };
}

TrainConfig apply_variant(TrainConfig cfg, const AblationVariant& v) {
  cfg.mme = v.mme;
  cfg.sc = v.sc;
  cfg.ga = v.ga;
  cfg.rd = v.rd;
  return cfg;
}

}  // namespace geolink
