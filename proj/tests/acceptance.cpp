// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero if a criterion outside --known-failures fails. Thresholds are
// pinned below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fixtures.hpp"
#include "geolink/ablation.hpp"
#include "geolink/error.hpp"
#include "geolink/image.hpp"
#include "oracles.hpp"

using namespace geolink;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleTol = 1e-9;
constexpr double kOracleBudgetSec = 30.0;
constexpr double kGradTol = 1e-3;
constexpr double kGradBudgetSec = 60.0;
constexpr double kGaussianMi = 0.5108256237659907;  // -0.5 ln(1 - 0.8^2)
constexpr double kIndependentTol = 0.05;
constexpr double kRdTol = 1e-10;
constexpr double kClosedFormTol = 1e-9;
constexpr double kScheduleTol = 1e-9;
constexpr double kAblationMargin = 0.05;
constexpr double kAblationBudgetSec = 20.0 * 60.0;
constexpr int kAblationSeeds = 5;
constexpr int kLossCurveMinSeeds = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean) / static_cast<double>(v.size());
  return s;
}

// Runs a shell command and returns its stdout; exit status goes to *status.
std::string run_command(const std::string& cmd, int* status) {
  std::string out;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) {
    *status = -1;
    return out;
  }
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
  const int rc = pclose(pipe);
  *status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return out;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// 1. Brute-force oracle equivalence.
Outcome oracle_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int checked = 0;
  double worst = 0.0;
  bool exact = true;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 63);
    const pc::Points p = oracle::random_points(n, rng);
    const int m = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    const int start = static_cast<int>(rng() % static_cast<unsigned>(n));
    const auto want = oracle::fps(p, m, start);
    exact &= pc::farthest_point_sampling(p, m, start) == want;
    exact &= pc::reference::farthest_point_sampling(p, m, start) == want;

    const int q = 1 + static_cast<int>(rng() % 8);
    const pc::Points queries = oracle::random_points(q, rng);
    const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    const auto knn_want = oracle::knn(queries, p, k);
    const auto got = pc::knn_group(queries, p, k);
    const auto ref = pc::reference::knn_group(queries, p, k);
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < k; ++j) {
        exact &= got(i, j) == knn_want[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        exact &= ref(i, j) == got(i, j);
      }
    }

    const int b = 2 + static_cast<int>(rng() % 7);
    const ag::Mat f = oracle::random_matrix(b, 6, rng);
    worst = std::max(worst, (obj::affinity(f) - oracle::affinity(f)).cwiseAbs().maxCoeff());

    const int g = 1 + static_cast<int>(rng() % 12);
    ret::Mat sims = oracle::random_matrix(q, g, rng);
    if (t % 2 == 0) sims = (sims * 2.0).array().round() / 2.0;
    ret::GroundTruth gt(static_cast<std::size_t>(q));
    for (auto& rel : gt) {
      const int nrel = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::min(3, g)));
      while (static_cast<int>(rel.size()) < nrel) {
        const int c = static_cast<int>(rng() % static_cast<unsigned>(g));
        if (std::find(rel.begin(), rel.end(), c) == rel.end()) rel.push_back(c);
      }
    }
    for (int kk : {1, 3, g}) worst = std::max(worst, std::abs(ret::recall_at_k(sims, gt, kk) - oracle::recall_at_k(sims, gt, kk)));
    worst = std::max(worst, std::abs(ret::average_precision(sims, gt) - oracle::average_precision(sims, gt)));
    ++checked;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = exact && worst <= kOracleTol && secs < kOracleBudgetSec;
  o.detail = std::to_string(checked) + " instances x {FPS, kNN, affinity, R@K, AP}, index match " +
             (exact ? "exact" : "BROKEN") + ", max abs err " + fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s";
  return o;
}

// 2. Finite-difference checks on L_total through every trainable path.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::set<std::string> covered;
  std::string worst_name;
  for (std::uint64_t seed : {1, 2}) {
    for (const auto& e : fixtures::total_loss_gradcheck(seed)) {
      if (e.rel_error > worst) {
        worst = e.rel_error;
        worst_name = e.name;
      }
      if (e.grad_norm > 0.0) covered.insert(e.name.substr(0, e.name.find('/')));
    }
  }
  const double secs = seconds_since(t0);
  const std::set<std::string> needed{"image", "mme", "proj", "est_d", "est_s", "log_tau"};
  const bool all_paths = std::includes(covered.begin(), covered.end(), needed.begin(), needed.end());
  Outcome o;
  o.pass = worst <= kGradTol && all_paths && secs < kGradBudgetSec;
  o.detail = "B=3 D=8, max rel err " + fmt("%.2e", worst) + " (" + worst_name + "), paths " +
             (all_paths ? "image/mme/proj/est_d/est_s/log_tau" : "INCOMPLETE") + ", " + fmt("%.1f", secs) + " s";
  return o;
}

struct VclubEval {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

// Fits a 1-D estimator by maximum likelihood, then evaluates the estimate and
// its standard error on fresh samples.
VclubEval fit_and_eval_vclub(double rho, std::uint64_t seed) {
  auto draw = [rho](int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    ag::Mat x(n, 1), y(n, 1);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = g(rng);
      y(i, 0) = rho * x(i, 0) + std::sqrt(1.0 - rho * rho) * g(rng);
    }
    return std::make_pair(x, y);
  };
  std::mt19937_64 rng(seed);
  const auto [xt, yt] = draw(10000, rng);
  auto est = obj::VClubEstimator::init(1, 16, 1, seed + 1);
  nn::ParameterSet params;
  est.register_params(params, "est/");
  nn::AdamW opt(nn::AdamWConfig{0.9, 0.999, 1e-8, 0.0});
  const FeatureBatch xb{ag::constant(xt), ViewTag::PointCloud, {}};
  const FeatureBatch yb{ag::constant(yt), ViewTag::Drone, {}};
  for (int step = 0; step < 600; ++step) {
    params.zero_grad();
    ag::backward(ag::scale(obj::vclub_loglik(est, xb, yb), -1.0));
    opt.step(params, step < 400 ? 1e-2 : 2e-3);
  }
  const auto [xe, ye] = draw(10000, rng);
  const ag::Mat mu = est.mean_map(ag::constant(xe), true).value();
  // Per-sample terms d_i = log q(y_i|x_i) - mean_j log q(y_i|x_j); their
  // mean is the estimate.
  const double mu_mean = mu.mean();
  const double mu_sq = mu.squaredNorm() / static_cast<double>(mu.rows());
  std::vector<double> d(static_cast<std::size_t>(ye.rows()));
  for (Eigen::Index i = 0; i < ye.rows(); ++i) {
    const double y = ye(i, 0);
    d[static_cast<std::size_t>(i)] = -0.5 * (y - mu(i, 0)) * (y - mu(i, 0)) + 0.5 * (y * y - 2.0 * y * mu_mean + mu_sq);
  }
  VclubEval r;
  r.estimate = obj::vclub_mi_upper(est, xe, ye);
  r.stderr_ = std::sqrt(variance(d) / static_cast<double>(d.size()));
  return r;
}

// 3. vCLUB against the analytic Gaussian MI.
Outcome vclub_suite() {
  const VclubEval corr = fit_and_eval_vclub(0.8, 31);
  const VclubEval indep = fit_and_eval_vclub(0.0, 32);
  Outcome o;
  const bool bound = corr.estimate - 2.0 * corr.stderr_ >= kGaussianMi;
  const bool zero = std::abs(indep.estimate) <= kIndependentTol;
  o.pass = bound && zero;
  o.detail = "rho=0.8 estimate " + fmt("%.4f", corr.estimate) + " - 2se " + fmt("%.4f", 2.0 * corr.stderr_) +
             " vs MI " + fmt("%.4f", kGaussianMi) + "; independent estimate " + fmt("%+.4f", indep.estimate);
  return o;
}

// 4. L_rd under rotation, positive scaling and translation of the teacher.
Outcome rd_suite() {
  std::mt19937_64 rng(44);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int b = 2 + static_cast<int>(rng() % 15);
    const int d = 2 + static_cast<int>(rng() % 15);
    const ag::Mat teacher = oracle::random_matrix(b, d, rng);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    const ag::Mat s1 = ((teacher * oracle::random_rotation(d, rng)) * u(rng)).rowwise() + oracle::random_matrix(1, d, rng).row(0);
    const ag::Mat s2 = ((teacher * oracle::random_rotation(d, rng)) * u(rng)).rowwise() + oracle::random_matrix(1, d, rng).row(0);
    const double l = obj::relation_distill_loss({ag::constant(s1), ViewTag::Drone, {}}, {ag::constant(s2), ViewTag::Satellite, {}},
                                                {ag::constant(teacher), ViewTag::PointCloud, {}})
                         .item();
    worst = std::max(worst, std::abs(l));
  }
  return {worst <= kRdTol, "100 random instances, max |L_rd| " + fmt("%.2e", worst)};
}

// 5. Closed-form loss values.
Outcome closed_form_suite() {
  const ag::Mat eye = ag::Mat::Identity(2, 2);
  const double matched = obj::info_nce(eye, eye, 1.0);
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  double uniform_err = 0.0;
  std::mt19937_64 rng(5);
  for (int b : {2, 4, 8}) {
    const ag::Mat q = oracle::normalize_rows(oracle::random_matrix(b, 3, rng));
    const ag::Mat r = ag::Mat::Constant(b, 3, 1.0 / std::sqrt(3.0));
    uniform_err = std::max(uniform_err, std::abs(obj::info_nce(q, r, 0.07) - std::log(static_cast<double>(b))));
  }
  const ag::Mat a = obj::affinity((ag::Mat(2, 2) << 0.3, -1.0, 2.0, 5.0).finished());
  const bool half = a(0, 1) == 0.5 && a(1, 0) == 0.5;
  Outcome o;
  o.pass = std::abs(matched - expect) <= kClosedFormTol && uniform_err <= kClosedFormTol && half;
  o.detail = "orthonormal " + fmt("%.12f", matched) + " (want " + fmt("%.12f", expect) + "), uniform err " +
             fmt("%.1e", uniform_err) + ", B=2 affinity " + fmt("%.17g", a(0, 1));
  return o;
}

// 6. Learning-rate schedule endpoints.
Outcome schedule_suite() {
  bool ok = true;
  std::string detail;
  for (int spe : {8, 100}) {
    const ScheduleConfig s{6e-4, 1e-4, 0.1, spe};
    const int total = 40 * spe;
    const double start = lr_at(s.warmup_steps(), total, s);
    const double end = lr_at(total, total, s);
    ok &= std::abs(start - 6e-4) <= kScheduleTol && std::abs(end - 1e-4) <= kScheduleTol;
    detail += "steps/epoch " + std::to_string(spe) + ": warmup end " + fmt("%.3e", start) + ", final " + fmt("%.3e", end) + "; ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

struct AblationRuns {
  std::map<std::string, std::vector<CrossDomainResult>> by_variant;
  double seconds = 0.0;
};

syn::Dataset make_domain(std::uint64_t seed, int scenes, const syn::DomainStyle& style) {
  syn::GeneratorConfig g;
  return syn::generate_dataset(seed, scenes, style, g);
}

// Trains the variants needed by criteria 7 and 8 on the source domain and
// evaluates them on the target domain.
AblationRuns run_ablation() {
  const auto t0 = Clock::now();
  const syn::Dataset source = make_domain(1, 64, syn::DomainStyle::source());
  const syn::Dataset target = make_domain(2, 32, syn::DomainStyle::target());
  AblationRuns runs;
  std::vector<std::pair<std::string, TrainConfig>> variants;
  for (const auto& v : standard_variants()) {
    if (v.name == "baseline" || v.name == "baseline+mme" || v.name == "full") variants.emplace_back(v.name, apply_variant(TrainConfig{}, v));
  }
  TrainConfig no_ga = apply_variant(TrainConfig{}, standard_variants().back());
  no_ga.ga = false;
  variants.emplace_back("full-without-ga", no_ga);
  for (int seed = 0; seed < kAblationSeeds; ++seed) {
    for (auto [name, cfg] : variants) {
      cfg.seed = static_cast<std::uint64_t>(seed);
      auto r = run_cross_domain(name, cfg, source, target);
      std::printf("  [ablation] seed %d %-16s target d2s R@1 %.4f AP %.4f\n", seed, name.c_str(), r.d2s.recall_at.at(1),
                  r.d2s.mean_ap);
      std::fflush(stdout);
      runs.by_variant[name].push_back(std::move(r));
    }
  }
  runs.seconds = seconds_since(t0);
  return runs;
}

// 7. Desk-scale ablation trend.
Outcome ablation_trend(const AblationRuns& runs) {
  auto med = [&](const std::string& name) {
    std::vector<double> v;
    for (const auto& r : runs.by_variant.at(name)) v.push_back(r.d2s.recall_at.at(1));
    return median(v);
  };
  const double base = med("baseline");
  const double with_mme = med("baseline+mme");
  const double full = med("full");
  // Budget counts the 15 runs of this criterion; the extra variant belongs to criterion 8.
  const double budget_secs = runs.seconds * 15.0 / 20.0;
  Outcome o;
  const bool mme_ok = with_mme >= base;
  const bool full_ok = full >= with_mme + kAblationMargin;
  o.pass = mme_ok && full_ok && budget_secs < kAblationBudgetSec;
  o.detail = "median target d2s R@1: baseline " + fmt("%.4f", base) + ", baseline+MME (cc only) " + fmt("%.4f", with_mme) +
             ", full " + fmt("%.4f", full) + "; MME>=baseline " + (mme_ok ? "yes" : "no") + ", full>=cc+0.05 " +
             (full_ok ? "yes" : "no") + ", " + fmt("%.0f", budget_secs) + " s";
  return o;
}

// 8. Loss-curve variance with and without L_ga.
Outcome loss_curve(const AblationRuns& runs) {
  const auto& with_ga = runs.by_variant.at("full");
  const auto& without = runs.by_variant.at("full-without-ga");
  int steady = 0;
  std::vector<double> ratios;
  for (std::size_t s = 0; s < with_ga.size(); ++s) {
    auto tail_var = [](const std::vector<StepRecord>& h, bool drone) {
      std::vector<double> v;
      for (std::size_t i = h.size() - h.size() / 4; i < h.size(); ++i) v.push_back(drone ? h[i].loss.nce_dro_pc : h[i].loss.nce_sat_pc);
      return variance(v);
    };
    const double rd = tail_var(with_ga[s].history, true) / tail_var(without[s].history, true);
    const double rs = tail_var(with_ga[s].history, false) / tail_var(without[s].history, false);
    ratios.push_back(std::max(rd, rs));
    if (rd <= 1.0 && rs <= 1.0) ++steady;
  }
  Outcome o;
  o.pass = steady >= kLossCurveMinSeeds;
  std::string per;
  for (double r : ratios) per += fmt("%.2f ", r);
  o.detail = "seeds with both variance ratios <= 1: " + std::to_string(steady) + "/" + std::to_string(ratios.size()) +
             ", median worst ratio " + fmt("%.3f", median(ratios)) + " (per seed: " + per.substr(0, per.size() - 1) + ")";
  return o;
}

// 9. 2D-only inference through the CLI.
Outcome inference_suite(const fs::path& cli, const fs::path& work) {
  fs::create_directories(work);
  std::ofstream(work / "tiny.cfg") << to_config_text([] {
    auto c = fixtures::tiny_config(3);
    c.epochs = 2;
    return c;
  }());
  int rc = 0;
  std::string log;
  auto run = [&](const std::string& args) {
    const std::string out = run_command(quote(cli) + " " + args, &rc);
    log += out;
    return out;
  };
  run("generate-data --seed 5 --scenes 12 --views 2 --side 16 --points 64 --train-fraction 0.5 --out " + quote(work / "data"));
  if (rc != 0) return {false, "generate-data failed: " + log};
  run("train --config " + quote(work / "tiny.cfg") + " --data " + quote(work / "data") + " --out " + quote(work / "run"));
  if (rc != 0) return {false, "train failed: " + log};
  const std::string eval_full = run("eval --ckpt " + quote(work / "run" / "checkpoint.bin") + " --data " + quote(work / "data") +
                                    " --split test --k 1,5 --out " + quote(work / "eval_full"));
  if (rc != 0) return {false, "eval failed: " + log};
  run("strip --ckpt " + quote(work / "run" / "checkpoint.bin") + " --out " + quote(work / "stripped.bin"));
  if (rc != 0) return {false, "strip failed: " + log};
  const std::string eval_stripped = run("eval --ckpt " + quote(work / "stripped.bin") + " --data " + quote(work / "data") +
                                        " --split test --k 1,5 --out " + quote(work / "eval_stripped"));
  if (rc != 0) return {false, "eval of stripped checkpoint failed: " + log};
  const fs::path scene = work / "data" / syn::scene_id(5, 0);
  run("encode --ckpt " + quote(work / "run" / "checkpoint.bin") + " --images " + quote(scene) + " --out " + quote(work / "f_full.rt"));
  run("encode --ckpt " + quote(work / "stripped.bin") + " --images " + quote(scene) + " --out " + quote(work / "f_stripped.rt"));
  if (rc != 0) return {false, "encode failed: " + log};

  const bool zero_calls = eval_full.find("pointcloud_encoder_invocations=0 mme_invocations=0") != std::string::npos &&
                          eval_stripped.find("pointcloud_encoder_invocations=0 mme_invocations=0") != std::string::npos;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool same_eval = slurp(work / "eval_full" / "result.json") == slurp(work / "eval_stripped" / "result.json") &&
                         !slurp(work / "eval_full" / "result.json").empty();
  const bool same_features = read_matrix_rt(work / "f_full.rt") == read_matrix_rt(work / "f_stripped.rt");
  Outcome o;
  o.pass = zero_calls && same_eval && same_features;
  o.detail = std::string("geolink eval 3D invocations ") + (zero_calls ? "0" : "NONZERO") + ", stripped result.json " +
             (same_eval ? "identical" : "DIFFERS") + ", stripped features " + (same_features ? "bitwise equal" : "DIFFER");
  return o;
}

// 10. Determinism, checkpoint round trip and resume.
Outcome persistence_suite(const fs::path& work) {
  fs::create_directories(work);
  const auto data = fixtures::tiny_data(16, 3);
  const auto cfg = fixtures::tiny_config(9);
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  auto same = [](const StepRecord& x, const StepRecord& y) {
    return x.lr == y.lr && x.loss.total == y.loss.total && x.loss.cc == y.loss.cc && x.loss.sc == y.loss.sc &&
           x.loss.ga == y.loss.ga && x.loss.rd == y.loss.rd && x.loss.tau == y.loss.tau && x.grad_norm == y.grad_norm;
  };
  bool deterministic = a.history.size() == b.history.size();
  for (std::size_t i = 0; deterministic && i < a.history.size(); ++i) deterministic = same(a.history[i], b.history[i]);

  save_checkpoint(work / "a.ckpt", a.checkpoint);
  const Checkpoint back = load_checkpoint(work / "a.ckpt");
  std::vector<const Image*> imgs;
  for (const auto& t : data.scenes) imgs.push_back(&t.satellite);
  bool roundtrip = encode_image_list(back.model, imgs, ViewTag::Satellite) == encode_image_list(a.checkpoint.model, imgs, ViewTag::Satellite);
  const ag::Mat raw = oracle::random_matrix(3, encoder_config(cfg).output_dim(), *std::make_unique<std::mt19937_64>(1));
  roundtrip &= pointcloud_features(back.model, raw, {"a", "b", "c"}).values.value() ==
               pointcloud_features(a.checkpoint.model, raw, {"a", "b", "c"}).values.value();

  Trainer first(cfg, data);
  const auto head = first.run(5);
  save_checkpoint(work / "mid.ckpt", first.checkpoint());
  Trainer second(load_checkpoint(work / "mid.ckpt"), data);
  const auto tail = second.run();
  bool resumed = head.size() + tail.size() == a.history.size();
  for (std::size_t i = 0; resumed && i < tail.size(); ++i) resumed = same(tail[i], a.history[head.size() + i]);

  Outcome o;
  o.pass = deterministic && roundtrip && resumed;
  o.detail = std::string("same-seed traces ") + (deterministic ? "bitwise equal" : "DIFFER") + " (" + std::to_string(a.history.size()) +
             " steps), save/load forward " + (roundtrip ? "bitwise equal" : "DIFFERS") + ", resume at step 5 " +
             (resumed ? "matches step-for-step" : "DIVERGES");
  return o;
}

// 11. Sensitivity sweep through the ablate command.
Outcome sweep_suite(const fs::path& cli, const fs::path& work) {
  int rc = 0;
  const auto t0 = Clock::now();
  const std::string out = run_command(quote(cli) + " ablate --grid sensitivity --out " + quote(work / "sweep"), &rc);
  if (rc != 0) return {false, "ablate failed: " + out};
  try {
    std::ifstream in(work / "sweep" / "report.json");
    const auto report = nlohmann::json::parse(in);
    validate_report(report);
    std::set<std::string> seen;
    for (const auto& r : report["runs"]) seen.insert(r["param"].get<std::string>() + "=" + r["value"].get<std::string>());
    std::set<std::string> want;
    for (const auto& p : sensitivity_grid()) want.insert(p.param + "=" + p.value);
    const bool complete = seen == want;
    return {complete, std::to_string(report["runs"].size()) + " runs (E x4, lambda x5, vclub_hidden x3), schema valid, top: " +
                          report["runs"][0]["param"].get<std::string>() + "=" + report["runs"][0]["value"].get<std::string>() +
                          ", " + fmt("%.0f", seconds_since(t0)) + " s"};
  } catch (const std::exception& e) {
    return {false, std::string("report invalid: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GeoLink acceptance runner"};
  std::vector<int> only;
  std::string cli_path = GEOLINK_CLI_PATH;
  std::string work_dir = (fs::temp_directory_path() / "geolink_acceptance").string();
  std::vector<int> known;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-failures", known, "Criteria that still print FAIL but do not set the exit code")->delimiter(',');
  app.add_option("--cli", cli_path, "Path to the geolink executable");
  app.add_option("--workdir", work_dir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  const std::vector<std::pair<int, std::string>> names{
      {1, "oracle equivalence"},      {2, "gradient verification"}, {3, "vCLUB Gaussian oracle"},
      {4, "relational invariance"},   {5, "closed-form losses"},    {6, "schedule endpoints"},
      {7, "desk-scale ablation"},     {8, "loss-curve steadiness"}, {9, "2D-only inference"},
      {10, "determinism/persistence"}, {11, "sensitivity harness"},
  };
  std::unique_ptr<AblationRuns> ablation;
  int failures = 0;
  int unexpected = 0;
  for (const auto& [id, name] : names) {
    if (!wanted(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      switch (id) {
        case 1: o = oracle_suite(); break;
        case 2: o = gradient_suite(); break;
        case 3: o = vclub_suite(); break;
        case 4: o = rd_suite(); break;
        case 5: o = closed_form_suite(); break;
        case 6: o = schedule_suite(); break;
        case 7:
        case 8:
          if (!ablation) ablation = std::make_unique<AblationRuns>(run_ablation());
          o = id == 7 ? ablation_trend(*ablation) : loss_curve(*ablation);
          break;
        case 9: o = inference_suite(cli_path, work / "inference"); break;
        case 10: o = persistence_suite(work / "persistence"); break;
        case 11: o = sweep_suite(cli_path, work); break;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool is_known = std::find(known.begin(), known.end(), id) != known.end();
    failures += o.pass ? 0 : 1;
    unexpected += o.pass || is_known ? 0 : 1;
    std::printf("criterion %2d %s: %s  [%s] (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed, %d outside the known-failure list\n", failures, unexpected);
  return unexpected == 0 ? 0 : 1;
}
