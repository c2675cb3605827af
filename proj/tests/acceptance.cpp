// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include "audmem/audio.hpp"
#include "audmem/context_model.hpp"
#include "audmem/error.hpp"
#include "audmem/events.hpp"
#include "audmem/experiment.hpp"
#include "audmem/features.hpp"
#include "audmem/salience.hpp"
#include "audmem/service.hpp"
#include "audmem/simulant.hpp"
#include "audmem/stats.hpp"

#include "plan_checker.hpp"
#include "salience_oracle.hpp"
#include "signals.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

using namespace audmem;
using nlohmann::json;

namespace {

// Collects the failed sub-checks of one criterion and the measured values.
struct Report {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <typename T>
  void note(const std::string& key, const T& value) {
    notes << (notes.tellp() > 0 ? "; " : "") << key << "=" << value;
  }
};

int run(const std::string& name, double budget_s, const std::function<void(Report&)>& body) {
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    r.failures.push_back("runtime " + std::to_string(secs) + " s over budget " + std::to_string(budget_s) + " s");
  }
  const bool ok = r.failures.empty();
  std::printf("%s %s (%.1f s): %s", ok ? "PASS" : "FAIL", name.c_str(), secs, r.notes.str().c_str());
  for (const auto& f : r.failures) std::printf(" | failed: %s", f.c_str());
  std::printf("\n");
  std::fflush(stdout);
  return ok ? 0 : 1;
}

std::vector<std::string> make_pool(int n) {
  std::vector<std::string> pool;
  for (int i = 0; i < n; ++i) pool.push_back("hcu" + std::to_string(10000 + i));
  return pool;
}

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

Dataset named(Eigen::MatrixXd x, Eigen::VectorXd y) {
  Dataset ds;
  for (Eigen::Index c = 0; c < x.cols(); ++c) ds.names.push_back("f" + std::to_string(c));
  ds.x = std::move(x);
  ds.y = std::move(y);
  return ds;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// 50 target appearances per sound at about 1.5 targets per game.
int games_for(int n_sounds, int per_sound) {
  return static_cast<int>(std::lround(n_sounds * per_sound / 1.5));
}

// ---------------------------------------------------------------------------

void scheduler(Report& r) {
  const auto pool = make_pool(402);
  int checked = 0, bad = 0, cap_ok = 0;
  for (int w = 0; w < 125; ++w) {
    WorkerHistory h;
    for (int g = 0; g < 8; ++g) {
      const SessionPlan p = plan_session(pool, h, static_cast<std::uint64_t>(w * 8 + g));
      const auto v = plan_check::violations(p, h.targets);
      if (!v.empty()) {
        ++bad;
        if (bad <= 3) r.failures.push_back("plan " + std::to_string(checked) + ": " + v.front());
      }
      ++checked;
      ++h.sessions;
      for (const auto& t : p.target_ids()) h.targets.insert(t);
    }
    try {
      plan_session(pool, h, 999);
    } catch (const WorkerExhausted&) {
      ++cap_ok;
    }
  }
  r.note("plans", checked);
  r.note("violations", bad);
  r.note("ninth_round_refused", std::to_string(cap_ok) + "/125");
  r.require(checked == 1000 && bad == 0, "every plan passes the checker");
  r.require(cap_ok == 125, "ninth round refused for every worker");
}

void scoring_oracle(Report& r) {
  const auto pool = make_pool(402);
  const auto profile = uniform_profile(pool, 0.1, 0.9, 0.0, 0.4, 1.0, 2024);
  const int n_games = games_for(402, 50);
  const auto records = simulate_games(pool, profile, n_games, 77);
  const auto accepted = accepted_sessions(records);
  const SoundScores scores = score_sounds(accepted);

  std::vector<double> planted, recovered;
  for (const auto& [id, s] : scores) {
    if (std::isnan(s.normalized)) continue;
    planted.push_back(profile.p_recall.at(id) - profile.p_confuse.at(id));
    recovered.push_back(s.normalized);
  }
  const auto rho = spearman(Eigen::Map<Eigen::VectorXd>(planted.data(), static_cast<Eigen::Index>(planted.size())),
                            Eigen::Map<Eigen::VectorXd>(recovered.data(), static_cast<Eigen::Index>(recovered.size())));
  ReliabilityOptions opt;
  opt.seed = 5;
  const ReliabilityResult rel = split_rank_reliability(accepted, opt);

  const auto null_profile = constant_profile(pool, 0.5, 0.2, 1.0);
  const auto null_accepted = accepted_sessions(simulate_games(pool, null_profile, n_games, 78));
  const ReliabilityResult null_rel = split_rank_reliability(null_accepted, opt);

  r.note("games", n_games);
  r.note("accepted", accepted.size());
  r.note("scored_sounds", planted.size());
  r.note("spearman", rho.rho);
  r.note("split_rho_M-C10", rel.mean_memorability);
  r.note("null_rho_M-C10", null_rel.mean_memorability);
  r.note("null_rho_C10", null_rel.mean_confusability);
  r.require(planted.size() == 402, "every sound scored");
  r.require(rho.defined() && rho.rho >= 0.9, "Spearman(planted, recovered) >= 0.9");
  r.require(rel.memorability_rho.size() == 5 && rel.mean_memorability >= 0.8, "split-rank mean rho >= 0.8");
  r.require(std::abs(null_rel.mean_memorability) < 0.1, "random-clicker |rho| < 0.1 on M - C10");
  r.require(std::abs(null_rel.mean_confusability) < 0.1, "random-clicker |rho| < 0.1 on C10");
}

void thresholds(Report& r) {
  const auto pool = make_pool(402);
  PlanConfig cfg;
  cfg.n_targets = 1;
  // Length 71 leaves 50 first presentations, so 20 of them is exactly 40%.
  std::uint64_t seed = 0;
  while (plan_session(pool, {}, seed, cfg).length() != 71) ++seed;
  const SessionPlan p = plan_session(pool, {}, seed, cfg);
  std::vector<int> vig, firsts;
  for (const auto& s : p.slots) {
    if (s.role == SlotRole::vigilance_second) vig.push_back(s.position);
    if (is_first_presentation(s.role)) firsts.push_back(s.position);
  }
  SessionLog at_vig;
  at_vig.clicks.insert(vig.begin(), vig.begin() + 12);
  const ValidationResult v60 = validate_session(p, at_vig);
  SessionLog above_vig = at_vig;
  above_vig.clicks.insert(vig[12]);
  const ValidationResult v65 = validate_session(p, above_vig);

  SessionLog at_fp;
  at_fp.clicks.insert(vig.begin(), vig.end());
  at_fp.clicks.insert(firsts.begin(), firsts.begin() + 20);
  const ValidationResult fp40 = validate_session(p, at_fp);
  SessionLog below_fp = at_fp;
  below_fp.clicks.erase(firsts[19]);
  const ValidationResult fp38 = validate_session(p, below_fp);

  r.note("vigilance_0.60_accepted", v60.accepted);
  r.note("vigilance_0.65_accepted", v65.accepted);
  r.note("fp_0.40_accepted", fp40.accepted);
  r.note("fp_0.38_accepted", fp38.accepted);
  r.require(firsts.size() == 50, "constructed plan has 50 first presentations");
  r.require(v60.vigilance_score == 0.6 && !v60.accepted, "vigilance exactly 0.6 rejected");
  r.require(v65.accepted, "vigilance 0.65 accepted");
  r.require(fp40.false_positive_rate == 0.4 && !fp40.accepted, "false positives exactly 0.4 rejected");
  r.require(fp38.accepted, "false positives 0.38 accepted");
}

void salience(Report& r) {
  const SalienceConfig cfg;
  const SalienceMaps flat = salience_maps(Eigen::MatrixXd::Constant(96, 128, 0.7), cfg);
  const double flat_max =
      std::max({flat.intensity.cwiseAbs().maxCoeff(), flat.frequency.cwiseAbs().maxCoeff(), flat.temporal.cwiseAbs().maxCoeff()});
  r.note("constant_max", flat_max);
  r.require(flat_max <= 1e-9, "constant input gives zero maps");

  Eigen::MatrixXd impulse = Eigen::MatrixXd::Zero(160, 240);
  impulse(100, 140) = 1.0;
  const SalienceMaps im = salience_maps(impulse, cfg);
  const int scale = 1 << cfg.output_level();
  int localized = 0;
  for (const Eigen::MatrixXd* m : {&im.intensity, &im.frequency, &im.temporal}) {
    Eigen::Index rr = 0, cc = 0;
    m->maxCoeff(&rr, &cc);
    localized += std::abs(rr - 100 / scale) <= 1 && std::abs(cc - 140 / scale) <= 1;
  }
  r.note("impulse_localized_channels", std::to_string(localized) + "/3");
  r.require(localized == 3, "impulse within one cell in every channel");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0.0;
  for (auto [rows, cols] : {std::pair{64, 64}, std::pair{40, 50}, std::pair{64, 17}}) {
    Eigen::MatrixXd img(rows, cols);
    for (Eigen::Index i = 0; i < img.size(); ++i) img(i) = u(rng);
    const SalienceMaps a = salience_maps(img, cfg);
    const SalienceMaps b = oracle::maps(img, cfg);
    worst = std::max({worst, (a.intensity - b.intensity).cwiseAbs().maxCoeff(),
                      (a.frequency - b.frequency).cwiseAbs().maxCoeff(), (a.temporal - b.temporal).cwiseAbs().maxCoeff()});
  }
  r.note("oracle_max_diff", worst);
  r.require(worst <= 1e-5, "brute-force oracle within 1e-5");

  Eigen::MatrixXd img(96, 96);
  for (Eigen::Index i = 0; i < img.size(); ++i) img(i) = u(rng);
  img.block(40, 60, 6, 6).array() += 2.0;
  const SalienceMaps base = salience_maps(img, cfg);
  int invariant = 0, total = 0;
  for (double s : {0.01, 3.0, 250.0}) {
    const SalienceMaps sc = salience_maps(Eigen::MatrixXd(img * s), cfg);
    for (auto [a, b] : {std::pair{&base.intensity, &sc.intensity}, std::pair{&base.frequency, &sc.frequency},
                        std::pair{&base.temporal, &sc.temporal}}) {
      Eigen::Index r0, c0, r1, c1;
      a->maxCoeff(&r0, &c0);
      b->maxCoeff(&r1, &c1);
      invariant += r0 == r1 && c0 == c1;
      ++total;
    }
  }
  r.note("argmax_invariant", std::to_string(invariant) + "/" + std::to_string(total));
  r.require(invariant == total, "argmax invariant under scaling");
}

void features(Report& r) {
  using namespace signals;
  double worst_sum = 0.0;
  for (const AudioClip& c : {tone(100.0), tone(1000.0), tone(8000.0), noise(1.0, 1), noise(1.0, 2, 0.01)}) {
    const EnergyHpss e = energy_and_hpss(stft_magnitude(c));
    worst_sum = std::max(worst_sum, std::abs(e.bass_ratio + e.mid_ratio + e.treble_ratio - 1.0));
  }
  r.note("band_sum_err", worst_sum);
  r.require(worst_sum <= 1e-9, "band ratios sum to 1");

  double worst_tone = 0.0, bin = 0.0;
  for (double hz : {440.0, 1000.0, 1021.5, 3000.0}) {
    const Spectrogram s = stft_magnitude(tone(hz));
    bin = s.freq_bin_hz;
    worst_tone = std::max(worst_tone, spectral_stats(s).avg_spectral_spread);
  }
  r.note("tone_spread_hz", worst_tone);
  r.note("bin_hz", bin);
  r.require(worst_tone < bin, "pure-tone spread under one bin");

  const SpectralStats ns = spectral_stats(stft_magnitude(noise(2.0, 7)));
  const double closed = 22050.0 / std::sqrt(12.0);
  r.note("noise_spread_hz", ns.avg_spectral_spread);
  r.require(std::abs(ns.avg_spectral_spread - closed) <= 0.1 * closed, "white-noise spread within 10% of 6366 Hz");

  const double single = pitch_diversity(tone(440.0, 2.0));
  const AudioClip alt = make_clip(4.0, [](double t) {
    const int note = static_cast<int>(t / 0.5);
    if (t - note * 0.5 >= 0.45) return 0.0;
    return 0.5 * std::sin(2 * std::numbers::pi * (note % 2 == 0 ? 440.0 : 660.0) * t);
  });
  const double two = pitch_diversity(alt);
  r.note("pitch_single", single);
  r.note("pitch_two_note", two);
  r.require(single == 0.0, "single tone pitch diversity 0");
  r.require(std::abs(two - std::log(2.0)) <= 0.1, "two-note alternation ln 2 +/- 0.1");

  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.5);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd x = gaussian(40, 6, rng);
    Eigen::VectorXd labels(40);
    for (Eigen::Index i = 0; i < 40; ++i) labels[i] = coin(rng);
    const Eigen::VectorXd w = gaussian(6, 1, rng);
    const double b = gaussian(1, 1, rng)(0);
    const Eigen::VectorXd grad = logistic_gradient(w, b, x, labels, 0.01);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k <= 6; ++k) {
      Eigen::VectorXd wp = w, wm = w;
      double bp = b, bm = b;
      if (k < 6) {
        wp[k] += h;
        wm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (logistic_objective(wp, bp, x, labels, 0.01) - logistic_objective(wm, bm, x, labels, 0.01)) / (2 * h);
      worst_rel = std::max(worst_rel, std::abs(fd - grad[k]) / std::max(std::abs(fd), 1e-8));
    }
  }
  r.note("logistic_grad_rel_err", worst_rel);
  r.require(worst_rel <= 1e-4, "logistic gradient vs finite differences");
}

void importance(Report& r) {
  ShapleyConfig cfg;
  cfg.iterations = 1000;

  // Planted signal: column 0 drives the target, the rest are noise.
  int first = 0;
  const int runs = 20;
  for (int run = 0; run < runs; ++run) {
    std::mt19937_64 rng(100 + static_cast<std::uint64_t>(run));
    const Eigen::MatrixXd x = gaussian(100, 12, rng);
    const Eigen::VectorXd y = (x.col(0).array().sin() * 2.0 + x.col(0).array()).matrix() + 0.5 * gaussian(100, 1, rng);
    cfg.seed = static_cast<std::uint64_t>(run);
    cfg.with_individual_r2 = false;
    first += shapley_importance(prepare_dataset(named(x, y)), cfg).entries.front().name == "f0";
  }
  r.note("planted_first", std::to_string(first) + "/" + std::to_string(runs));
  r.require(first >= 19, "planted feature first in >= 95% of runs");

  // Duplicate columns share credit evenly.
  {
    std::mt19937_64 rng(7);
    Eigen::MatrixXd x = gaussian(100, 12, rng);
    x.col(11) = x.col(0);
    const Eigen::VectorXd y = x.col(0) * 1.5 + 0.5 * gaussian(100, 1, rng);
    cfg.seed = 1;
    const ImportanceReport rep = shapley_importance(prepare_dataset(named(x, y)), cfg);
    const double a = rep.find("f0")->shapley_delta_r2, b = rep.find("f11")->shapley_delta_r2;
    r.note("duplicate_delta", std::to_string(a) + "/" + std::to_string(b));
    r.require(a > 0 && b > 0 && std::max(a, b) <= 2.0 * std::min(a, b), "duplicate columns within a factor of 2");
  }

  // Pure noise at full size: no column earns 0.05.
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = gaussian(400, 40, rng);
  const Eigen::VectorXd y = gaussian(400, 1, rng);
  cfg.seed = 2;
  cfg.with_individual_r2 = true;
  const auto t0 = std::chrono::steady_clock::now();
  const ImportanceReport null_rep = shapley_importance(prepare_dataset(named(x, y)), cfg);
  const double null_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double ceiling = null_rep.entries.front().shapley_delta_r2;
  r.note("null_max_delta", ceiling);
  r.note("null_run_s", null_secs);
  r.require(ceiling < 0.05, "all-noise ceiling < 0.05");
  r.require(null_secs < 300.0, "1000 iterations at 400x40 under 5 min");

  const std::string csv = null_rep.to_csv();
  const bool header = csv.rfind("feature,individual_r2,shapley_delta_r2,n_evaluations\n", 0) == 0;
  r.require(header && std::count(csv.begin(), csv.end(), '\n') == 41, "report CSV has one row per feature");
}

// Synthetic feature table: 30 high-level and 30 low-level Gaussian columns.
FeatureTable synthetic_table(const std::vector<std::string>& pool, std::uint64_t seed) {
  std::vector<FeatureColumn> cols;
  for (int i = 0; i < 30; ++i) cols.push_back({"hl_f" + std::to_string(i), FeatureTag::high_level});
  for (int i = 0; i < 30; ++i) cols.push_back({"low_f" + std::to_string(i), FeatureTag::low_level});
  FeatureTable t(cols);
  std::mt19937_64 rng(seed);
  for (const auto& id : pool) t.add_row(id, gaussian(60, 1, rng).col(0));
  return t;
}

void context_grid(Report& r) {
  const auto pool = make_pool(402);
  const FeatureTable table = synthetic_table(pool, 31);
  const Eigen::Index hl0 = 0, low3 = 33;

  // Recall depends on absolute features only.
  SimulantProfile base;
  base.p_vigilance = 1.0;
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> confuse(0.0, 0.4);
  for (const auto& id : pool) {
    const Eigen::VectorXd row = table.row(id);
    base.p_recall[id] = 0.1 + 0.8 * sigmoid(2.0 * row[hl0]);
    base.p_confuse[id] = confuse(rng);
  }
  const int n_games = games_for(402, 50);
  ContextEvalConfig cfg;
  cfg.seed = 3;

  const ExperimentGrid free_grid = context_evaluation(simulate_games(pool, base, n_games, 33), table, cfg);

  // Planted: recall follows the context z of one column with K = 1. The base
  // logit cancels the target's own share of z, so what remains depends only on
  // the preceding sound and no absolute feature can explain it.
  SimulantProfile planted = base;
  ContextSensitivity ctx;
  for (const auto& id : pool) ctx.feature[id] = table.row(id)[low3];
  ctx.beta = 3.0;
  ctx.k = 1;
  for (const auto& id : pool) {
    planted.p_recall[id] = sigmoid(2.0 * table.row(id)[hl0] - ctx.beta * ctx.feature[id]);
  }
  planted.context = ctx;
  const ExperimentGrid planted_grid = context_evaluation(simulate_games(pool, planted, n_games, 34), table, cfg);

  bool rows_ok = true;
  double worst_gain = -1.0, worst_noise_gap = 0.0, min_planted_gain = 1.0;
  for (int k : cfg.context_lengths) {
    const GridRow* abs_row = free_grid.find("absolute_only", k);
    rows_ok &= abs_row && !abs_row->error;
    for (const auto& set : grid_feature_sets()) {
      const GridRow* row = free_grid.find(set, k);
      rows_ok &= row && !row->error;
      if (!row || row->error || set == "absolute_only" || set == "context_only_noise_baseline") continue;
      worst_gain = std::max(worst_gain, row->accuracy - abs_row->accuracy);
    }
    const GridRow* t = free_grid.find("context_only", k);
    const GridRow* n = free_grid.find("context_only_noise_baseline", k);
    if (t && n) worst_noise_gap = std::max(worst_noise_gap, std::abs(t->accuracy - n->accuracy));

    const GridRow* pa = planted_grid.find("absolute_only", k);
    const GridRow* pc = planted_grid.find("absolute_plus_all_context", k);
    rows_ok &= pa && pc && !pa->error && !pc->error;
    if (k == ctx.k && pa && pc) min_planted_gain = pc->accuracy - pa->accuracy;
    r.note("K" + std::to_string(k) + "_abs", abs_row ? abs_row->accuracy : NAN);
    r.note("K" + std::to_string(k) + "_ctx_only_true/noise",
           std::to_string(t ? t->accuracy : NAN) + "/" + std::to_string(n ? n->accuracy : NAN));
    r.note("K" + std::to_string(k) + "_planted_abs/all", std::to_string(pa ? pa->accuracy : NAN) + "/" +
                                                            std::to_string(pc ? pc->accuracy : NAN));
  }
  const GridRow* any = free_grid.find("absolute_only", 5);
  r.note("examples_K5", any ? any->n_examples : 0);
  r.note("top_features", free_grid.top_features.size());
  r.require(rows_ok, "every grid row evaluated");
  r.require(free_grid.top_features.size() == 50, "top-50 context features");
  r.require(worst_gain <= 0.02, "no context variant beats absolute-only by more than 2 points");
  r.require(worst_noise_gap < 0.03, "noise vs true context-only within 3 points");
  r.require(min_planted_gain > 0.05, "planted context effect gains more than 5 points");
}

void replay_equivalence(Report& r) {
  namespace fs = std::filesystem;
  const fs::path log = fs::temp_directory_path() / ("audmem_acceptance_" + std::to_string(::getpid()) + ".jsonl");
  fs::remove(log);
  const auto pool = make_pool(402);
  const auto profile = uniform_profile(pool, 0.1, 0.9, 0.0, 0.4, 0.95, 41);

  ServiceConfig cfg;
  cfg.pool = pool;
  // Each clip's bytes are its sound id, which lets the simulated listener recognise repeats.
  cfg.clips = [](const std::string& id) { return std::vector<std::uint8_t>(id.begin(), id.end()); };
  cfg.event_log = log;
  cfg.seed = 42;

  json live_scores;
  std::map<std::string, json> live_results;
  {
    ExperimentService svc(cfg);
    HttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    cli.set_keep_alive(true);
    cli.set_tcp_nodelay(true);
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0, 1);
    for (int s = 0; s < 200; ++s) {
      const std::string worker = "worker" + std::to_string(s / 8);
      auto start = cli.Post("/api/session", json{{"worker_id", worker}}.dump(), "application/json");
      if (!start || start->status != 200) throw std::runtime_error("session start failed");
      const json j = json::parse(start->body);
      const std::string id = j["session_id"];
      const int n = j["n_slots"];
      std::map<std::string, int> heard;
      for (int p = 0; p < n; ++p) {
        auto clip = cli.Get("/api/session/" + id + "/clip/" + std::to_string(p));
        if (!clip || clip->status != 200) throw std::runtime_error("clip request failed");
        const std::string sound = clip->body;
        const auto seen = heard.find(sound);
        double prob = profile.p_confuse.at(sound);
        if (seen != heard.end()) prob = p - seen->second > 10 ? profile.p_recall.at(sound) : profile.p_vigilance;
        heard[sound] = p;
        if (u(rng) < prob) {
          cli.Post("/api/session/" + id + "/click", json{{"position", p}, {"latency_ms", 300 + p}}.dump(),
                   "application/json");
        }
      }
      auto fin = cli.Post("/api/session/" + id + "/finish", "", "application/json");
      if (!fin || fin->status != 200) throw std::runtime_error("finish failed");
      live_results[id] = json::parse(fin->body);
    }
    auto sc = cli.Get("/api/scores");
    if (!sc || sc->status != 200) throw std::runtime_error("scores request failed");
    live_scores = json::parse(sc->body);
    server.stop();
  }

  const ReplayResult replay = replay_events(read_events(log));
  const auto records = finished_records(replay);
  const auto accepted = accepted_sessions(records);
  const SoundScores from_log = score_sounds(accepted);
  int mismatched_sessions = 0;
  for (const auto& rec : records) {
    const ValidationResult v = validate_session(rec.plan, rec.log);
    const json& live = live_results.at(rec.plan.session_id);
    mismatched_sessions += live["accepted"] != v.accepted || live["vigilance_score"] != v.vigilance_score ||
                           live["false_positive_rate"] != v.false_positive_rate ||
                           live["display_score"] != display_score(rec.plan, rec.log);
  }
  int mismatched_sounds = 0, compared = 0;
  for (const auto& [id, s] : from_log) {
    const json& live = live_scores["sounds"].at(id);
    auto same = [](const json& j, double v) { return std::isnan(v) ? j.is_null() : j.get<double>() == v; };
    mismatched_sounds += !same(live["M"], s.m) || !same(live["C10"], s.c10) || !same(live["normalized"], s.normalized);
    ++compared;
  }
  // A restarted service rebuilds from the log alone and reports the same document.
  const bool restart_same = json::parse(ExperimentService(cfg).scores().body) == live_scores;
  fs::remove(log);

  r.note("sessions", records.size());
  r.note("accepted", accepted.size());
  r.note("sounds_compared", compared);
  r.note("session_mismatches", mismatched_sessions);
  r.note("score_mismatches", mismatched_sounds);
  r.require(records.size() == 200, "200 finished sessions replayed");
  r.require(live_scores["n_accepted"] == accepted.size(), "accepted count matches");
  r.require(mismatched_sessions == 0, "per-session results bit-exact");
  r.require(compared > 0 && static_cast<std::size_t>(compared) == live_scores["sounds"].size() &&
                mismatched_sounds == 0,
            "per-sound scores bit-exact");
  r.require(restart_same, "restarted service reports identical scores");
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by name.
  const std::vector<std::string> only(argv + 1, argv + argc);
  const std::vector<std::tuple<std::string, double, std::function<void(Report&)>>> criteria{
      {"scheduler-protocol", 10, scheduler},  {"scoring-oracle", 120, scoring_oracle},
      {"validation-thresholds", 0, thresholds}, {"salience-suite", 0, salience},
      {"feature-suite", 0, features},          {"importance-suite", 0, importance},
      {"context-grid", 0, context_grid},       {"replay-equivalence", 0, replay_equivalence},
  };
  int failures = 0, ran = 0;
  for (const auto& [name, budget, body] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    failures += run(name, budget, body);
    ++ran;
  }
  std::printf("%d of %d criteria failed\n", failures, ran);
  return failures;
}
