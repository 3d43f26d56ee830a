#pragma once

#include "visor/dataset.hpp"
#include "visor/episode.hpp"
#include "visor/policy.hpp"

#include <json.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace visor {

class EmptyResults : public Error {
 public:
  using Error::Error;
};

class NonPositiveShortestPath : public Error {
 public:
  using Error::Error;
};

/// Success weighted by path length, (1/N) sum S_i l_i / max(p_i, l_i), in [0, 1].
double spl(std::span<const EpisodeResult> results);
/// Fraction of successful episodes, in [0, 1].
double success_rate(std::span<const EpisodeResult> results);

struct EvalReport {
  std::string policy;
  std::string split;
  EpisodeMode mode = EpisodeMode::Normal;
  std::uint64_t seed = 0;
  int episodes = 0;
  double sr = 0.0;   ///< percent
  double spl = 0.0;  ///< percent
  double mean_steps = 0.0;
  double mean_decisions = 0.0;
  int hallucinations = 0;
  int parse_failures = 0;
  std::map<std::string, int> terminations;
  std::vector<EpisodeResult> results;
};

struct EvalOptions {
  int jobs = 1;
  RunOptions run;
  std::string split = "bench";
};

/// Runs every episode with a fresh policy from the factory. Policies that are
/// not concurrent-safe are queried one at a time.
EvalReport evaluate(const PolicyFactory& factory, const std::vector<BenchmarkEpisode>& episodes, EpisodeMode mode,
                    std::uint64_t seed, const EvalOptions& options = {});

nlohmann::json report_to_json(const EvalReport& report, bool per_episode = true);
EvalReport report_from_json(const nlohmann::json& doc);
std::string report_text(const EvalReport& report);
/// Side-by-side SR/SPL with deltas (b minus a).
std::string compare_reports(const EvalReport& a, const EvalReport& b);

}  // namespace visor
