#include "visor/eval.hpp"
#include "visor/policies.hpp"

#include <doctest.h>

using namespace visor;

namespace {

EpisodeResult result(bool success, double p, double l) {
  EpisodeResult r;
  r.episode_id = "e";
  r.success = success;
  r.path_length = p;
  r.shortest_path = l;
  r.termination = success ? Termination::StoppedCorrect : Termination::StoppedWrong;
  return r;
}

/// Plain-loop reference for the path-weighted success score.
double reference_spl(const std::vector<EpisodeResult>& rs) {
  double sum = 0.0;
  for (const auto& r : rs) {
    if (!r.success) continue;
    sum += r.path_length > r.shortest_path ? r.shortest_path / r.path_length : 1.0;
  }
  return sum / rs.size();
}

const std::vector<BenchmarkEpisode>& bench() {
  static const auto eps = generate_episodes(12, 11, "bench");
  return eps;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("spl worked examples") {
  CHECK(spl(std::vector{result(true, 5.0, 5.0)}) == doctest::Approx(1.0));
  CHECK(spl(std::vector{result(false, 5.0, 5.0)}) == 0.0);
  CHECK(spl(std::vector{result(true, 6.25, 5.0)}) == doctest::Approx(0.8));
  // Shorter than the geodesic (stopping inside the radius) still scores 1.
  CHECK(spl(std::vector{result(true, 4.5, 5.0)}) == doctest::Approx(1.0));
  CHECK(spl(std::vector{result(true, 10.0, 5.0), result(false, 1.0, 2.0)}) == doctest::Approx(0.25));
  CHECK(success_rate(std::vector{result(true, 10.0, 5.0), result(false, 1.0, 2.0)}) == doctest::Approx(0.5));
}

TEST_CASE("spl errors") {
  CHECK_THROWS_AS(spl(std::vector<EpisodeResult>{}), EmptyResults);
  CHECK_THROWS_AS(success_rate(std::vector<EpisodeResult>{}), EmptyResults);
  CHECK_THROWS_AS(spl(std::vector{result(true, 1.0, 0.0)}), NonPositiveShortestPath);
}

TEST_CASE("spl matches the reference on random results and never exceeds the success rate") {
  Rng rng(19);
  for (int t = 0; t < 100; ++t) {
    std::vector<EpisodeResult> rs;
    for (int i = rng.uniform_int(1, 30); i > 0; --i) {
      const double l = rng.uniform(0.5, 10.0);
      rs.push_back(result(rng.bernoulli(0.6), l * rng.uniform(0.8, 3.0), l));
    }
    const double s = spl(rs);
    CHECK(s == doctest::Approx(reference_spl(rs)).epsilon(1e-12));
    CHECK(s >= 0.0);
    CHECK(s <= success_rate(rs) + 1e-12);
  }
}

TEST_CASE("evaluate aggregates its own per-episode results") {
  for (const std::string name : {"oracle", "random"}) {
    const auto report = evaluate(make_policy_factory(name), bench(), EpisodeMode::Normal, 5);
    REQUIRE(report.results.size() == bench().size());
    CHECK(report.episodes == static_cast<int>(bench().size()));
    CHECK(report.sr == doctest::Approx(100.0 * success_rate(report.results)));
    CHECK(report.spl == doctest::Approx(100.0 * reference_spl(report.results)));
    CHECK(report.spl <= report.sr + 1e-9);
    int total = 0, halluc = 0;
    for (const auto& [k, n] : report.terminations) total += n;
    for (const auto& r : report.results) halluc += r.hallucinations;
    CHECK(total == report.episodes);
    CHECK(halluc == report.hallucinations);
    for (std::size_t i = 0; i < bench().size(); ++i) CHECK(report.results[i].episode_id == bench()[i].id);
    MESSAGE(name << ": SR " << report.sr << " SPL " << report.spl);
  }
}

TEST_CASE("evaluation is deterministic across runs and worker counts") {
  const auto a = evaluate(make_policy_factory("random"), bench(), EpisodeMode::Normal, 5);
  EvalOptions two;
  two.jobs = 2;
  const auto b = evaluate(make_policy_factory("random"), bench(), EpisodeMode::Normal, 5, two);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) CHECK(same_outcome(a.results[i], b.results[i]));
  CHECK(report_to_json(a, true) == report_to_json(b, true));
  const auto c = evaluate(make_policy_factory("random"), bench(), EpisodeMode::Normal, 6);
  CHECK_FALSE(report_to_json(a, true) == report_to_json(c, true));
}

TEST_CASE("oracle stop never lowers the success rate") {
  for (const std::string name : {"random", "heuristic"}) {
    const auto normal = evaluate(make_policy_factory(name), bench(), EpisodeMode::Normal, 5);
    const auto os = evaluate(make_policy_factory(name), bench(), EpisodeMode::OracleStop, 5);
    CHECK(os.sr >= normal.sr);
  }
}

TEST_CASE("report JSON round trip and text") {
  const auto a = evaluate(make_policy_factory("heuristic"), bench(), EpisodeMode::OracleStop, 5);
  const auto doc = report_to_json(a, true);
  const auto back = report_from_json(doc);
  CHECK(report_to_json(back, true) == doc);
  CHECK(back.mode == EpisodeMode::OracleStop);
  CHECK(back.results.size() == a.results.size());
  CHECK_FALSE(report_to_json(a, false).contains("results"));
  CHECK(report_text(a).find("heuristic") != std::string::npos);
  const auto b = evaluate(make_policy_factory("oracle"), bench(), EpisodeMode::OracleStop, 5);
  CHECK(compare_reports(a, b).find("oracle") != std::string::npos);
  auto bad = doc;
  bad["version"] = 2;
  CHECK_THROWS_AS(report_from_json(bad), Error);
}

}  // TEST_SUITE
