#include "audmem/audio.hpp"
#include "audmem/context_model.hpp"
#include "audmem/csv.hpp"
#include "audmem/dataset.hpp"
#include "audmem/error.hpp"
#include "audmem/events.hpp"
#include "audmem/experiment.hpp"
#include "audmem/features.hpp"
#include "audmem/salience.hpp"
#include "audmem/service.hpp"
#include "audmem/simulant.hpp"
#include "audmem/stats.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace audmem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

std::vector<SessionRecord> load_records(const std::string& events) {
  return finished_records(replay_events(read_events(events)));
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& field : csv::parse(s).at(0)) out.push_back(std::stoi(field));
  return out;
}

// 8-bit binary PGM, min-max scaled, low frequencies at the bottom.
void write_pgm(const fs::path& path, const Eigen::MatrixXd& m) {
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
  for (Eigen::Index r = m.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (m(r, c) - lo) / span))));
    }
  }
}

std::vector<std::string> synthetic_pool(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "snd%04d", i);
    ids.emplace_back(buf);
  }
  return ids;
}

int run_serve(std::uint64_t seed) {
  const std::string listen = env_or("LISTEN_ADDR", "0.0.0.0:8080");
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw ConfigError("LISTEN_ADDR must be host:port");
  const std::string manifest = env_or("POOL_MANIFEST", "");
  if (manifest.empty()) throw ConfigError("POOL_MANIFEST is required");
  const auto paths = read_pool_manifest(manifest, env_or("AUDIO_DIR", ""));

  ServiceConfig cfg;
  for (const auto& [id, _] : paths) cfg.pool.push_back(id);
  cfg.clips = file_clip_source(paths);
  cfg.event_log = env_or("EVENT_LOG_PATH", "events.jsonl");
  cfg.seed = seed;
  ExperimentService service(cfg);
  HttpServer server(service);
  std::cerr << "serving " << cfg.pool.size() << " sounds on " << listen << ", log " << cfg.event_log << "\n";
  server.listen(listen.substr(0, colon), std::stoi(listen.substr(colon + 1)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sound memorability experiment and analysis toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;

  auto* serve = app.add_subcommand("serve", "Run the HTTP experiment service (configured by environment)");
  serve->add_option("--seed", seed, "Plan seed");

  std::string sim_out = "events.jsonl", sim_manifest, sim_truth;
  int sim_sounds = 402, sim_games = 13400;
  double recall_lo = 0.1, recall_hi = 0.9, confuse_lo = 0.0, confuse_hi = 0.4, vigilance = 0.95;
  auto* simulate = app.add_subcommand("simulate", "Simulate games and write the event log");
  simulate->add_option("--out", sim_out, "Event log to write");
  simulate->add_option("--sounds", sim_sounds, "Synthetic pool size (ignored with --pool)");
  simulate->add_option("--pool", sim_manifest, "Pool manifest CSV (sound_id,path)");
  simulate->add_option("--games", sim_games, "Number of games");
  simulate->add_option("--seed", seed, "Seed");
  simulate->add_option("--recall-lo", recall_lo);
  simulate->add_option("--recall-hi", recall_hi);
  simulate->add_option("--confuse-lo", confuse_lo);
  simulate->add_option("--confuse-hi", confuse_hi);
  simulate->add_option("--vigilance", vigilance, "Click probability on vigilance repeats");
  simulate->add_option("--truth", sim_truth, "CSV of planted per-sound parameters");

  std::string audio_dir, ratings, feat_out = "features.csv", salience_dir;
  auto* extract = app.add_subcommand("extract-features", "Compute the per-sound feature table");
  extract->add_option("--audio-dir", audio_dir, "Directory of WAV files")->required();
  extract->add_option("--ratings", ratings, "High-level ratings CSV");
  extract->add_option("--out", feat_out, "Output CSV");
  extract->add_option("--salience-dir", salience_dir, "Write salience maps as PGM images here");

  std::string events = "events.jsonl", scores_out = "scores.csv";
  auto* score = app.add_subcommand("score", "Per-sound M, C10 and normalized scores from accepted games");
  score->add_option("--events", events, "Event log")->required();
  score->add_option("--out", scores_out, "Output CSV ('-' for stdout)");

  int splits = 5;
  auto* reliability = app.add_subcommand("reliability", "Split-half rank reliability by worker");
  reliability->add_option("--events", events, "Event log")->required();
  reliability->add_option("--splits", splits, "Number of random splits");
  reliability->add_option("--seed", seed, "Seed");

  std::string features_path, scores_path, target = "normalized", shapley_out = "-";
  int iters = 10000, n_min = 1, n_max = 10;
  bool use_svr = false;
  auto* shapley = app.add_subcommand("shapley", "Sampled Shapley feature importance");
  shapley->add_option("--features", features_path, "Feature table CSV")->required();
  shapley->add_option("--scores", scores_path, "Scores CSV")->required();
  shapley->add_option("--target", target, "normalized | memorability | confusability");
  shapley->add_option("--iters", iters, "Iterations");
  shapley->add_option("--n-min", n_min, "Smallest base size");
  shapley->add_option("--n-max", n_max, "Largest base size");
  shapley->add_option("--seed", seed, "Seed");
  shapley->add_flag("--svr", use_svr, "Use epsilon-SVR instead of kernel ridge");
  shapley->add_option("--out", shapley_out, "Output CSV ('-' for stdout)");

  std::string ks = "1,5", context_out = "-";
  bool rank_by_shapley = false;
  auto* context = app.add_subcommand("context-eval", "Per-game recall models with and without context");
  context->add_option("--events", events, "Event log")->required();
  context->add_option("--features", features_path, "Feature table CSV")->required();
  context->add_option("--k", ks, "Context lengths, comma separated");
  context->add_option("--seed", seed, "Seed");
  context->add_flag("--rank-by-shapley", rank_by_shapley, "Pick top context features by Shapley gain");
  context->add_option("--out", context_out, "Output CSV ('-' for stdout)");

  int bins = 20;
  std::string report_out = "-";
  auto* report = app.add_subcommand("report", "Score histograms as CSV");
  report->add_option("--scores", scores_path, "Scores CSV")->required();
  report->add_option("--bins", bins, "Bins per histogram");
  report->add_option("--out", report_out, "Output CSV ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return run_serve(seed);

    if (*simulate) {
      std::vector<std::string> pool;
      if (!sim_manifest.empty()) {
        for (const auto& [id, _] : read_pool_manifest(sim_manifest, {})) pool.push_back(id);
      } else {
        pool = synthetic_pool(sim_sounds);
      }
      const auto profile = uniform_profile(pool, recall_lo, recall_hi, confuse_lo, confuse_hi, vigilance, seed);
      const auto records = simulate_games(pool, profile, sim_games, seed);
      write_events(sim_out, records_to_events(records));
      if (!sim_truth.empty()) {
        std::string text = "sound_id,p_recall,p_confuse\n";
        for (const auto& id : pool) {
          text += csv::join({id, csv::format_number(profile.p_recall.at(id)),
                             csv::format_number(profile.p_confuse.at(id))}) + "\n";
        }
        write_text(sim_truth, text);
      }
      std::cerr << "wrote " << records.size() << " games to " << sim_out << "\n";
      return 0;
    }

    if (*extract) {
      std::vector<AudioClip> clips;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(audio_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) clips.push_back(load_audio(f));
      std::vector<HighLevelRatings> hl;
      if (!ratings.empty()) {
        const auto ingest = ingest_high_level(fs::path(ratings));
        for (const auto& [line, reason] : ingest.rejected) std::cerr << "ratings line " << line << ": " << reason << "\n";
        hl = ingest.ratings;
      }
      const FeatureConfig cfg;
      const FeatureTable table = build_feature_table(clips, hl, cfg);
      for (const auto& [id, msg] : table.row_errors) std::cerr << id << ": " << msg << "\n";
      write_text(feat_out, table.to_csv());
      if (!salience_dir.empty()) {
        fs::create_directories(salience_dir);
        for (const auto& clip : clips) {
          if (table.row_errors.count(clip.id)) continue;
          const auto spec = log_compress(stft_magnitude(resample_linear(clip, cfg.sample_rate), cfg.window_len, cfg.hop),
                                         cfg.floor_db);
          const auto maps = salience_maps(spec, cfg.salience);
          write_pgm(fs::path(salience_dir) / (clip.id + "_intensity.pgm"), maps.intensity);
          write_pgm(fs::path(salience_dir) / (clip.id + "_frequency.pgm"), maps.frequency);
          write_pgm(fs::path(salience_dir) / (clip.id + "_temporal.pgm"), maps.temporal);
        }
      }
      return 0;
    }

    if (*score) {
      const auto records = load_records(events);
      const auto accepted = accepted_sessions(records);
      std::cerr << accepted.size() << " of " << records.size() << " finished games accepted\n";
      write_text(scores_out, scores_to_csv(score_sounds(accepted)));
      return 0;
    }

    if (*reliability) {
      ReliabilityOptions opt;
      opt.n_splits = splits;
      opt.seed = seed;
      const auto r = split_rank_reliability(accepted_sessions(load_records(events)), opt);
      std::cout << "split,memorability_rho,confusability_rho\n";
      for (std::size_t i = 0; i < r.memorability_rho.size(); ++i) {
        std::cout << i << "," << csv::format_number(r.memorability_rho[i]) << ","
                  << csv::format_number(r.confusability_rho[i]) << "\n";
      }
      std::cout << "mean," << csv::format_number(r.mean_memorability) << ","
                << csv::format_number(r.mean_confusability) << "\n";
      return 0;
    }

    if (*shapley) {
      const FeatureTable table = FeatureTable::from_csv(features_path);
      const SoundScores scores = scores_from_csv(read_text(scores_path));
      std::vector<std::string> dropped;
      const Dataset ds = prepare_dataset(join_scores(table, scores, parse_score_target(target)), &dropped);
      for (const auto& d : dropped) std::cerr << "dropped constant column " << d << "\n";
      ShapleyConfig cfg;
      cfg.iterations = iters;
      cfg.n_min = n_min;
      cfg.n_max = n_max;
      cfg.seed = seed;
      if (use_svr) cfg.regressor.kind = RegressorKind::epsilon_svr;
      const auto rep = shapley_importance(ds, cfg);
      if (rep.skipped_iterations > 0) std::cerr << rep.skipped_iterations << " iterations skipped on fit errors\n";
      write_text(shapley_out, rep.to_csv());
      return 0;
    }

    if (*context) {
      ContextEvalConfig cfg;
      cfg.context_lengths = parse_int_list(ks);
      cfg.seed = seed;
      cfg.cv.seed = seed;
      if (rank_by_shapley) cfg.ranking = TopFeatureRanking::shapley_delta_r2;
      const auto grid = context_evaluation(load_records(events), FeatureTable::from_csv(features_path), cfg);
      write_text(context_out, grid.to_csv());
      return 0;
    }

    if (*report) {
      const auto scores = scores_from_csv(read_text(scores_path));
      if (bins < 1) throw ConfigError("bins must be positive");
      std::string text = "metric,bin_lo,bin_hi,count\n";
      auto histogram = [&](const std::string& name, double lo, double hi, auto value) {
        std::vector<int> counts(static_cast<std::size_t>(bins), 0);
        for (const auto& [id, s] : scores) {
          const double v = value(s);
          if (std::isnan(v)) continue;
          const int b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
          ++counts[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < bins; ++b) {
          text += csv::join({name, csv::format_number(lo + (hi - lo) * b / bins),
                             csv::format_number(lo + (hi - lo) * (b + 1) / bins),
                             std::to_string(counts[static_cast<std::size_t>(b)])}) + "\n";
        }
      };
      histogram("memorability", 0.0, 1.0, [](const SoundScore& s) { return s.m; });
      histogram("confusability", 0.0, 1.0, [](const SoundScore& s) { return s.c10; });
      histogram("normalized", -1.0, 1.0, [](const SoundScore& s) { return s.normalized; });
      write_text(report_out, text);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
