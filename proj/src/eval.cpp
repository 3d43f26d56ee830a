#include "visor/eval.hpp"

#include "visor/world_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace visor {

using nlohmann::json;

double spl(std::span<const EpisodeResult> results) {
  if (results.empty()) throw EmptyResults("spl of no episodes");
  double total = 0.0;
  for (const auto& r : results) {
    if (!(r.shortest_path > 0.0)) throw NonPositiveShortestPath("episode " + r.episode_id + " has l <= 0");
    if (r.success) total += r.shortest_path / std::max(r.path_length, r.shortest_path);
  }
  return total / static_cast<double>(results.size());
}

double success_rate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw EmptyResults("success rate of no episodes");
  const auto n = std::count_if(results.begin(), results.end(), [](const EpisodeResult& r) { return r.success; });
  return static_cast<double>(n) / static_cast<double>(results.size());
}

namespace {

/// Serializes respond() for policies that cannot take concurrent queries.
class SerializedPolicy : public Policy, public PrivilegedPolicy {
 public:
  SerializedPolicy(Policy& inner, std::mutex& mutex) : inner_(inner), mutex_(mutex) {}
  std::string name() const override { return inner_.name(); }
  void reset(std::uint64_t seed) override {
    std::lock_guard lock(mutex_);
    inner_.reset(seed);
  }
  void set_privileged(const PrivilegedInfo& info) override { info_ = info; }
  std::string respond(const PolicyQuery& query) override {
    std::lock_guard lock(mutex_);
    if (auto* p = dynamic_cast<PrivilegedPolicy*>(&inner_)) p->set_privileged(info_);
    return inner_.respond(query);
  }

 private:
  Policy& inner_;
  std::mutex& mutex_;
  PrivilegedInfo info_;
};

}  // namespace

EvalReport evaluate(const PolicyFactory& factory, const std::vector<BenchmarkEpisode>& episodes, EpisodeMode mode,
                    std::uint64_t seed, const EvalOptions& options) {
  if (episodes.empty()) throw EmptyResults("no episodes to evaluate");
  EvalReport report;
  report.mode = mode;
  report.seed = seed;
  report.split = options.split;
  report.episodes = static_cast<int>(episodes.size());
  report.results.resize(episodes.size());

  // Workers own their policy unless it is a shared, serialized connection.
  std::unique_ptr<Policy> probe = factory();
  report.policy = probe->name();
  const bool shared = !probe->concurrent_safe() && dynamic_cast<PrivilegedPolicy*>(probe.get()) == nullptr;
  std::mutex shared_mutex;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&](Policy* own) {
    std::unique_ptr<Policy> local;
    if (own == nullptr && !shared) {
      local = factory();
      own = local.get();
    }
    for (std::size_t i = next++; i < episodes.size(); i = next++) {
      try {
        const std::uint64_t ep_seed = derive_seed(seed, i);
        if (shared) {
          SerializedPolicy wrapper(*probe, shared_mutex);
          report.results[i] = run_episode(episodes[i].spec(), wrapper, mode, ep_seed, options.run);
        } else {
          report.results[i] = run_episode(episodes[i].spec(), *own, mode, ep_seed, options.run);
        }
        spdlog::debug("{} {}: {}", report.policy, episodes[i].id, to_string(report.results[i].termination));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker, nullptr);
  worker(shared ? nullptr : probe.get());
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  double steps = 0.0, decisions = 0.0;
  for (const auto& r : report.results) {
    report.terminations[to_string(r.termination)] += 1;
    report.hallucinations += r.hallucinations;
    report.parse_failures += r.parse_failures;
    steps += r.low_level_steps;
    decisions += static_cast<double>(r.decisions.size());
  }
  report.sr = 100.0 * success_rate(report.results);
  report.spl = 100.0 * spl(report.results);
  report.mean_steps = steps / report.results.size();
  report.mean_decisions = decisions / report.results.size();
  return report;
}

json report_to_json(const EvalReport& r, bool per_episode) {
  json doc = {{"version", 1},
              {"policy", r.policy},
              {"split", r.split},
              {"mode", to_string(r.mode)},
              {"seed", r.seed},
              {"episodes", r.episodes},
              {"sr", r.sr},
              {"spl", r.spl},
              {"mean_steps", r.mean_steps},
              {"mean_decisions", r.mean_decisions},
              {"hallucinations", r.hallucinations},
              {"parse_failures", r.parse_failures},
              {"terminations", r.terminations}};
  if (per_episode) {
    json eps = json::array();
    for (const auto& e : r.results) eps.push_back(result_summary(e));
    doc["results"] = eps;
  }
  return doc;
}

EvalReport report_from_json(const json& doc) {
  if (doc.at("version").get<int>() != 1) throw Error("unsupported report version");
  EvalReport r;
  r.policy = doc.at("policy").get<std::string>();
  r.split = doc.at("split").get<std::string>();
  r.mode = mode_from_string(doc.at("mode").get<std::string>());
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.episodes = doc.at("episodes").get<int>();
  r.sr = doc.at("sr").get<double>();
  r.spl = doc.at("spl").get<double>();
  r.mean_steps = doc.at("mean_steps").get<double>();
  r.mean_decisions = doc.at("mean_decisions").get<double>();
  r.hallucinations = doc.at("hallucinations").get<int>();
  r.parse_failures = doc.at("parse_failures").get<int>();
  r.terminations = doc.at("terminations").get<std::map<std::string, int>>();
  if (doc.contains("results")) {
    for (const auto& e : doc.at("results")) {
      EpisodeResult res;
      res.episode_id = e.at("episode_id").get<std::string>();
      res.success = e.at("success").get<bool>();
      res.termination = termination_from_string(e.at("termination").get<std::string>());
      res.low_level_steps = e.at("low_level_steps").get<int>();
      res.forward_steps = e.at("forward_steps").get<int>();
      res.path_length = e.at("path_length").get<double>();
      res.shortest_path = e.at("shortest_path").get<double>();
      res.final_geodesic = e.at("final_geodesic").get<double>();
      res.final_pose = pose_from_json(e.at("final_pose"));
      res.hallucinations = e.at("hallucinations").get<int>();
      res.parse_failures = e.at("parse_failures").get<int>();
      // Logs are not stored in reports; empty entries keep the count.
      res.decisions.resize(e.at("decisions").get<std::size_t>());
      r.results.push_back(std::move(res));
    }
  }
  return r;
}

std::string report_text(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "policy " << r.policy << "  split " << r.split << "  mode " << to_string(r.mode) << "  seed " << r.seed << "\n";
  out << "episodes        " << r.episodes << "\n";
  out << "SR (%)          " << r.sr << "\n";
  out << "SPL (%)         " << r.spl << "\n";
  out << "mean steps      " << r.mean_steps << "\n";
  out << "mean decisions  " << r.mean_decisions << "\n";
  out << "hallucinations  " << r.hallucinations << "\n";
  out << "parse failures  " << r.parse_failures << "\n";
  for (const auto& [k, v] : r.terminations) out << "  " << std::left << std::setw(16) << k << v << "\n";
  return out.str();
}

std::string compare_reports(const EvalReport& a, const EvalReport& b) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto label = [](const EvalReport& r) { return r.policy + "/" + to_string(r.mode); };
  out << std::left << std::setw(10) << "metric" << std::setw(24) << label(a) << std::setw(24) << label(b) << "delta\n";
  auto row = [&](const char* name, double x, double y) {
    out << std::left << std::setw(10) << name << std::setw(24) << x << std::setw(24) << y << std::showpos << (y - x)
        << std::noshowpos << "\n";
  };
  row("SR", a.sr, b.sr);
  row("SPL", a.spl, b.spl);
  row("steps", a.mean_steps, b.mean_steps);
  if (a.episodes != b.episodes) out << "warning: episode counts differ (" << a.episodes << " vs " << b.episodes << ")\n";
  return out.str();
}

}  // namespace visor
