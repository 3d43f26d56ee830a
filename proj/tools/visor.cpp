// visor: one entry point for world generation, corpus building, rollouts,
// evaluation and toy-policy training.

#include "json_config.hpp"

#include "visor/dataset.hpp"
#include "visor/episode.hpp"
#include "visor/eval.hpp"
#include "visor/image_io.hpp"
#include "visor/learn.hpp"
#include "visor/policies.hpp"
#include "visor/world_io.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace visor;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("visor");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("VISOR_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    throw InvalidConfig("VISOR_LOG must be error, info or debug, not '" + level + "'");
  }
}

EpisodeMode parse_mode(const std::string& s) {
  try {
    return mode_from_string(s);
  } catch (const Error&) {
    throw InvalidConfig("mode must be normal or oracle-stop, not '" + s + "'");
  }
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Training data shared by train-sft and train-gspo.

struct DataArgs {
  std::string corpus;
  std::string split = "train";
  std::string heldout_split = "val";
  int synthetic = 4000;
  double stop_fraction = 0.047;
  std::uint64_t data_seed = 101;
  int heldout = 1000;
  double heldout_stop_fraction = 0.5;
  std::uint64_t heldout_seed = 202;
  bool balance = false;
  std::uint64_t balance_seed = 7;

  void add(CLI::App* sub, bool with_balance) {
    sub->add_option("--corpus", corpus, "corpus root from gen-corpus; synthetic decisions when empty");
    sub->add_option("--split", split, "corpus split to train on");
    sub->add_option("--heldout-split", heldout_split, "corpus split to evaluate on");
    sub->add_option("--synthetic", synthetic, "synthetic training decisions")->check(CLI::PositiveNumber);
    sub->add_option("--stop-fraction", stop_fraction, "stop share of synthetic training decisions")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--data-seed", data_seed, "seed of the synthetic training decisions");
    sub->add_option("--heldout", heldout, "synthetic held-out decisions")->check(CLI::PositiveNumber);
    sub->add_option("--heldout-stop-fraction", heldout_stop_fraction, "stop share of held-out decisions")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--heldout-seed", heldout_seed, "seed of the synthetic held-out decisions");
    if (with_balance) {
      sub->add_flag("--balance", balance, "train on the stop/non-stop balanced subsample");
      sub->add_option("--balance-seed", balance_seed, "seed of the balanced subsample");
    }
  }

  std::pair<std::vector<ToyPrompt>, std::vector<ToyPrompt>> load() const {
    std::vector<DecisionRecord> train, held;
    if (corpus.empty()) {
      train = synthetic_records(synthetic, stop_fraction, data_seed);
      held = synthetic_records(heldout, heldout_stop_fraction, heldout_seed);
    } else {
      train = read_corpus(corpus, split);
      held = read_corpus(corpus, heldout_split);
    }
    if (balance) train = balance_rl(train, balance_seed);
    spdlog::info("training on {} decisions ({}), {} held out", train.size(), balance ? "balanced" : "as generated",
                 held.size());
    return {prompts_from_records(train), prompts_from_records(held)};
  }
};

json evaluation_json(const ToyEvaluation& e) {
  return {{"mean_reward", e.mean_reward},
          {"accuracy", e.accuracy},
          {"stop_recall", std::isfinite(e.stop_recall) ? json(e.stop_recall) : json(nullptr)},
          {"decisions", e.decisions},
          {"stop_decisions", e.stop_decisions}};
}

void print_evaluation(const char* what, const ToyEvaluation& e) {
  std::printf("%-10s reward %.4f  accuracy %.4f  stop recall %.4f  (%d decisions, %d stop)\n", what, e.mean_reward,
              e.accuracy, e.stop_recall, e.decisions, e.stop_decisions);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visor: waypoint-selection navigation on generated worlds"};
  app.require_subcommand(1, 1);
  app.config_formatter(std::make_shared<cli::JsonConfig>());
  app.set_config("--config", "", "JSON run manifest; flags override it");
  app.option_defaults()->always_capture_default();
  std::function<void()> run;

  // gen-world -------------------------------------------------------------
  std::uint64_t world_seed = 7;
  WorldConfig world_config;
  fs::path world_out;
  auto* gen_world = app.add_subcommand("gen-world", "generate one world: world.json plus a map image");
  gen_world->add_option("--seed", world_seed, "world seed")->required();
  gen_world->add_option("--out", world_out, "output directory")->required();
  gen_world->add_option("--width", world_config.width, "cells along x");
  gen_world->add_option("--height", world_config.height, "cells along y");
  gen_world->add_option("--rooms", world_config.rooms, "room count");
  gen_world->add_option("--objects", world_config.objects, "object count");
  gen_world->callback([&] {
    run = [&] {
      const GridWorld world = generate_world(world_seed, world_config);
      fs::create_directories(world_out);
      write_json(world_out / "world.json", world_to_json(world));
      RgbImage image(static_cast<int>(world.width()), static_cast<int>(world.height()));
      for (int y = 0; y < world.height(); ++y) {
        for (int x = 0; x < world.width(); ++x) {
          const CellIndex c{x, y};
          const int id = world.object_at(c);
          Rgb px = world.is_free(c) ? kFloorColor : Rgb{40, 40, 40};
          if (id >= 0) px = world.object(id)->render_color;
          image.at(world.height() - 1 - y, x) = px;
        }
      }
      write_file(world_out / "map.png", encode_png(image));
      std::printf("world seed %llu: %dx%d cells, %zu rooms, %zu objects, %d free cells\n",
                  static_cast<unsigned long long>(world_seed), world.width(), world.height(), world.rooms().size(),
                  world.objects().size(), free_cell_count(world));
    };
  });

  // gen-corpus ------------------------------------------------------------
  int corpus_episodes = 200;
  std::uint64_t corpus_seed = 3;
  std::string corpus_split = "train";
  fs::path corpus_out;
  int corpus_jobs = 1;
  CorpusOptions corpus_options;
  bool no_images = false;
  auto* gen_corpus = app.add_subcommand("gen-corpus", "follow shortest paths and write decision records");
  gen_corpus->add_option("--episodes", corpus_episodes, "episodes to follow")->check(CLI::PositiveNumber);
  gen_corpus->add_option("--seed", corpus_seed, "corpus seed");
  gen_corpus->add_option("--split", corpus_split, "split name; splits draw disjoint worlds");
  gen_corpus->add_option("--out", corpus_out, "corpus root; records land in <out>/<split>/")->required();
  gen_corpus->add_option("--jobs", corpus_jobs, "worker threads")->check(CLI::PositiveNumber);
  gen_corpus->add_option("--max-decisions", corpus_options.max_decisions, "decisions before an episode is aborted");
  gen_corpus->add_flag("--no-images", no_images, "skip PNG sidecars");
  gen_corpus->callback([&] {
    run = [&] {
      corpus_options.jobs = corpus_jobs;
      corpus_options.keep_images = !no_images;
      const CorpusResult res = generate_corpus(corpus_episodes, corpus_seed, corpus_split, corpus_options);
      write_corpus(corpus_out, corpus_split, res.records);
      std::cout << stats_table({corpus_stats(corpus_split, res.records)});
      std::printf("%d episodes, %d aborted\n", res.episodes, res.aborted);
    };
  });

  // stats -----------------------------------------------------------------
  fs::path stats_corpus;
  std::vector<std::string> stats_splits{"train"};
  auto* stats = app.add_subcommand("stats", "corpus statistics per split");
  stats->add_option("--corpus", stats_corpus, "corpus root")->required();
  stats->add_option("--splits", stats_splits, "splits to summarize");
  stats->callback([&] {
    run = [&] {
      std::vector<CorpusStats> rows;
      for (const auto& s : stats_splits) rows.push_back(corpus_stats(s, read_corpus(stats_corpus, s)));
      std::cout << stats_table(rows);
      for (const auto& r : rows) {
        std::printf("%s: %d episodes, at most %d stop per episode, %.2f instruction tokens on average\n",
                    r.split.c_str(), r.episodes, r.max_stops_per_episode, r.mean_instruction_tokens);
      }
    };
  });

  // run-episode / evaluate share the benchmark definition -------------------
  std::string policy_spec = "oracle";
  std::string mode_name = "normal";
  std::uint64_t bench_seed = 11;
  std::string bench_split = "bench";
  int timeout_ms = 30000;

  int episode_index = 0;
  std::uint64_t run_seed = 0;
  fs::path episode_out;
  auto* run_episode_cmd = app.add_subcommand("run-episode", "roll out one benchmark episode with per-step frames");
  run_episode_cmd->add_option("--policy", policy_spec, "oracle, random, heuristic, exec:<cmd>, tcp:<host>:<port>");
  run_episode_cmd->add_option("--mode", mode_name, "normal or oracle-stop");
  run_episode_cmd->add_option("--bench-seed", bench_seed, "benchmark seed");
  run_episode_cmd->add_option("--split", bench_split, "benchmark split");
  run_episode_cmd->add_option("--index", episode_index, "episode index within the benchmark")
      ->check(CLI::NonNegativeNumber);
  run_episode_cmd->add_option("--seed", run_seed, "rollout seed");
  run_episode_cmd->add_option("--timeout-ms", timeout_ms, "external policy reply timeout");
  run_episode_cmd->add_option("--out", episode_out, "episode log directory")->required();
  run_episode_cmd->callback([&] {
    run = [&] {
      const EpisodeMode mode = parse_mode(mode_name);
      const auto factory = make_policy_factory(policy_spec, std::chrono::milliseconds(timeout_ms));
      const auto episodes = generate_episodes(episode_index + 1, bench_seed, bench_split);
      const BenchmarkEpisode& ep = episodes.at(static_cast<std::size_t>(episode_index));
      auto policy = factory();
      RunOptions options;
      options.keep_frames = true;
      const EpisodeSpec spec = ep.spec();
      const EpisodeResult res = run_episode(spec, *policy, mode, run_seed, options);
      write_episode_log(episode_out, spec, res, mode, run_seed);
      std::printf("%s: %s, %d steps, p %.2f m, l %.2f m, final geodesic %.2f m\n", ep.id.c_str(),
                  to_string(res.termination), res.low_level_steps, res.path_length, res.shortest_path,
                  res.final_geodesic);
    };
  });

  int eval_episodes = 100;
  std::uint64_t eval_seed = 5;
  int eval_jobs = 1;
  fs::path eval_out;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "SR and SPL of a policy on a generated benchmark");
  evaluate_cmd->add_option("--policy", policy_spec, "oracle, random, heuristic, exec:<cmd>, tcp:<host>:<port>");
  evaluate_cmd->add_option("--mode", mode_name, "normal or oracle-stop");
  evaluate_cmd->add_option("--episodes", eval_episodes, "benchmark size")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--bench-seed", bench_seed, "benchmark seed");
  evaluate_cmd->add_option("--split", bench_split, "benchmark split");
  evaluate_cmd->add_option("--seed", eval_seed, "rollout seed");
  evaluate_cmd->add_option("--jobs", eval_jobs, "worker threads")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--timeout-ms", timeout_ms, "external policy reply timeout");
  evaluate_cmd->add_option("--out", eval_out, "directory for report.json and report.txt");
  evaluate_cmd->callback([&] {
    run = [&] {
      const EpisodeMode mode = parse_mode(mode_name);
      const auto factory = make_policy_factory(policy_spec, std::chrono::milliseconds(timeout_ms));
      const auto episodes = generate_episodes(eval_episodes, bench_seed, bench_split);
      EvalOptions options;
      options.jobs = eval_jobs;
      options.split = bench_split;
      const EvalReport report = evaluate(factory, episodes, mode, eval_seed, options);
      const std::string text = report_text(report);
      std::cout << text;
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        write_json(eval_out / "report.json", report_to_json(report));
        write_text(eval_out / "report.txt", text);
      }
    };
  });

  // train-sft -------------------------------------------------------------
  DataArgs sft_data;
  SftConfig sft_config;
  fs::path sft_out;
  auto* train_sft_cmd = app.add_subcommand("train-sft", "teacher-forced warm-up of the toy policy");
  sft_data.add(train_sft_cmd, false);
  train_sft_cmd->add_option("--steps", sft_config.steps, "gradient steps");
  train_sft_cmd->add_option("--batch", sft_config.batch_size, "decisions per step")->check(CLI::PositiveNumber);
  train_sft_cmd->add_option("--lr", sft_config.learning_rate, "learning rate");
  train_sft_cmd->add_option("--seed", sft_config.seed, "minibatch seed");
  train_sft_cmd->add_option("--out", sft_out, "output directory")->required();
  train_sft_cmd->callback([&] {
    run = [&] {
      const auto [train, held] = sft_data.load();
      ToyPolicy policy;
      const auto curve = train_sft(policy, train, sft_config);
      fs::create_directories(sft_out);
      std::string csv = "step,loss\n";
      for (const auto& s : curve) csv += std::to_string(s.step) + "," + std::to_string(s.loss) + "\n";
      write_text(sft_out / "sft_curve.csv", csv);
      const ToyEvaluation tr = evaluate_toy(policy, train), ho = evaluate_toy(policy, held);
      save_checkpoint(sft_out / "sft.bin", policy, {{"stage", "sft"}, {"steps", sft_config.steps}});
      write_json(sft_out / "eval.json", {{"train", evaluation_json(tr)}, {"heldout", evaluation_json(ho)}});
      print_evaluation("train", tr);
      print_evaluation("heldout", ho);
    };
  });

  // train-gspo ------------------------------------------------------------
  DataArgs rl_data;
  RLConfig rl_config;
  fs::path rl_init, rl_out;
  int warm_steps = 200;
  auto* train_gspo_cmd = app.add_subcommand("train-gspo", "group sequence policy optimization of the toy policy");
  rl_data.add(train_gspo_cmd, true);
  train_gspo_cmd->add_option("--init", rl_init, "SFT checkpoint; otherwise warm-started here on the unbalanced data");
  train_gspo_cmd->add_option("--warm-steps", warm_steps, "SFT steps when no --init is given");
  train_gspo_cmd->add_option("--steps", rl_config.steps, "policy updates");
  train_gspo_cmd->add_option("--group-size", rl_config.group_size, "samples per prompt");
  train_gspo_cmd->add_option("--prompts", rl_config.prompts_per_step, "prompts per update");
  train_gspo_cmd->add_option("--inner-epochs", rl_config.inner_epochs, "gradient steps per rollout batch");
  train_gspo_cmd->add_option("--beta", rl_config.beta, "KL weight");
  train_gspo_cmd->add_option("--clip", rl_config.clip_eps, "ratio clip epsilon");
  train_gspo_cmd->add_option("--lr", rl_config.learning_rate, "learning rate");
  train_gspo_cmd->add_option("--ref-every", rl_config.ref_every, "steps between reference snapshots, 0 = never");
  train_gspo_cmd->add_flag("--token-level", rl_config.token_level, "per-token ratios instead of the sequence ratio");
  train_gspo_cmd->add_option("--format-weight", rl_config.weights.format, "format reward weight");
  train_gspo_cmd->add_option("--action-weight", rl_config.weights.action, "action reward weight");
  train_gspo_cmd->add_option("--seed", rl_config.seed, "sampling seed");
  train_gspo_cmd->add_option("--out", rl_out, "output directory")->required();
  train_gspo_cmd->callback([&] {
    run = [&] {
      validate(rl_config);
      ToyPolicy init;
      if (!rl_init.empty()) {
        init = load_checkpoint(rl_init);
      } else {
        DataArgs warm = rl_data;
        warm.balance = false;
        const auto [warm_train, unused] = warm.load();
        SftConfig sc;
        sc.steps = warm_steps;
        sc.seed = rl_config.seed;
        train_sft(init, warm_train, sc);
      }
      const auto [train, held] = rl_data.load();
      fs::create_directories(rl_out);
      const GspoResult res = train_gspo(init, train, rl_config);
      write_curve_csv(rl_out / "curve.csv", res.curve);
      const ToyEvaluation before = evaluate_toy(init, held, rl_config.weights);
      const ToyEvaluation after = evaluate_toy(res.policy, held, rl_config.weights);
      save_checkpoint(rl_out / "gspo.bin", res.policy,
                      {{"stage", "gspo"}, {"beta", rl_config.beta}, {"steps", rl_config.steps},
                       {"group_size", rl_config.group_size}, {"balanced", rl_data.balance}});
      write_json(rl_out / "eval.json", {{"warm_start", evaluation_json(before)}, {"final", evaluation_json(after)}});
      print_evaluation("warm start", before);
      print_evaluation("final", after);
    };
  });

  // replay ----------------------------------------------------------------
  fs::path replay_log, replay_out;
  auto* replay = app.add_subcommand("replay", "re-run a logged episode and re-render its frames");
  replay->add_option("--log", replay_log, "episode log directory from run-episode")->required();
  replay->add_option("--out", replay_out, "directory for the re-rendered log")->required();
  replay->callback([&] {
    run = [&] {
      const EpisodeLog log = read_episode_log(replay_log);
      const EpisodeSpec spec = spec_from_log(log);
      ReplayPolicy policy(log.responses);
      RunOptions options;
      options.keep_frames = true;
      const EpisodeResult res = run_episode(spec, policy, log.mode, log.seed, options);
      write_episode_log(replay_out, spec, res, log.mode, log.seed);
      const json now = result_summary(res);
      if (now != log.summary) throw Error("replay diverged from the log: " + now.dump());
      std::printf("%s replayed: %s, %d steps\n", log.episode_id.c_str(), to_string(res.termination),
                  res.low_level_steps);
    };
  });

  // compare ---------------------------------------------------------------
  fs::path report_a, report_b;
  auto* compare = app.add_subcommand("compare", "diff two evaluation reports");
  compare->add_option("a", report_a, "first report.json")->required()->check(CLI::ExistingFile);
  compare->add_option("b", report_b, "second report.json")->required()->check(CLI::ExistingFile);
  compare->callback([&] {
    run = [&] {
      const EvalReport a = report_from_json(json::parse(read_text(report_a)));
      const EvalReport b = report_from_json(json::parse(read_text(report_b)));
      std::cout << compare_reports(a, b);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    setup_logging();
    run();
  } catch (const InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
