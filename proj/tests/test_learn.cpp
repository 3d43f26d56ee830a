#include "visor/learn.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace visor;

namespace {

std::vector<ToyPrompt> toy_prompts(int n, double stop_fraction, std::uint64_t seed) {
  return prompts_from_records(synthetic_records(n, stop_fraction, seed));
}

ToyPolicy random_policy(Rng& rng, double scale = 1.0) {
  ToyPolicy p;
  for (int i = 0; i < kToyParams; ++i) p.theta[i] = rng.normal(0.0, scale);
  return p;
}

/// Norm-wise relative error between two gradients.
double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-8});
}

template <class F>
Eigen::VectorXd central_difference(const ToyPolicy& at, F&& f, double h = 1e-5) {
  Eigen::VectorXd g(kToyParams);
  for (int i = 0; i < kToyParams; ++i) {
    ToyPolicy plus = at, minus = at;
    plus.theta[i] += h;
    minus.theta[i] -= h;
    g[i] = (f(plus) - f(minus)) / (2 * h);
  }
  return g;
}

GroupRollout fixed_group(const ToyPrompt& prompt, const ToyPolicy& policy, std::vector<double> advantages,
                         double log_ratio) {
  GroupRollout g;
  g.prompt = prompt;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    GroupMember m;
    m.seq = target_sequence(prompt);
    m.seq.action = static_cast<int>(i % prompt.actions.size());
    m.logp_old = token_logprobs(policy, prompt, m.seq).array() - log_ratio;
    g.members.push_back(m);
  }
  g.advantages = std::move(advantages);
  return g;
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("reward examples") {
  const std::string good = "<think>a</think><think_summary>b</think_summary><action>D</action>";
  CHECK(compute_reward(good, "D").total == doctest::Approx(1.0));
  CHECK(compute_reward(good, "C").total == doctest::Approx(0.1));
  const auto none = compute_reward("<think>a</think><think_summary>b</think_summary>", "D");
  CHECK(none.format == 0);
  CHECK(none.action == 0);
  CHECK(none.total == 0.0);
  CHECK(compute_reward("<action>stop</action>", "stop").total == doctest::Approx(0.9));
  CHECK(compute_reward("<think></think><think_summary></think_summary><action>banana</action>", "D").total ==
        doctest::Approx(0.1));
  CHECK(compute_reward("", "stop").total == 0.0);
}

TEST_CASE("token log-probabilities match a hand-written softmax") {
  Rng rng(4);
  const auto prompts = toy_prompts(20, 0.5, 8);
  const ToyPolicy p = random_policy(rng);
  for (const auto& prompt : prompts) {
    const ToySequence seq{{0, 1, 2}, static_cast<int>(prompt.actions.size()) - 1};
    const auto lp = token_logprobs(p, prompt, seq);
    for (int pos = 0; pos < kStructPositions; ++pos) {
      double z = 0.0;
      for (int v = 0; v < kStructVocab; ++v) z += std::exp(p.theta[kActionFeatures + pos * kStructVocab + v]);
      CHECK(lp[pos] == doctest::Approx(p.theta[kActionFeatures + pos * kStructVocab + seq.tags[pos]] - std::log(z)));
    }
    double z = 0.0;
    std::vector<double> logits;
    for (Eigen::Index a = 0; a < prompt.features.rows(); ++a) {
      double l = 0.0;
      for (int f = 0; f < kActionFeatures; ++f) l += prompt.features(a, f) * p.theta[f];
      logits.push_back(l);
      z += std::exp(l);
    }
    CHECK(lp[kStructPositions] == doctest::Approx(logits[seq.action] - std::log(z)));
    CHECK(action_probabilities(p, prompt).sum() == doctest::Approx(1.0));
    CHECK(struct_probabilities(p, 1).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("prompts follow their records") {
  const auto recs = synthetic_records(50, 0.2, 3);
  int stops = 0;
  for (const auto& r : recs) {
    const ToyPrompt p = prompt_from_record(r);
    CHECK(p.actions.back() == "stop");
    CHECK(p.actions.size() == r.candidates.size() + 1);
    CHECK(p.features.rows() == static_cast<Eigen::Index>(p.actions.size()));
    CHECK(std::find(p.actions.begin(), p.actions.end(), p.gt) != p.actions.end());
    stops += p.is_stop();
  }
  CHECK(stops == 10);
  CHECK(synthetic_records(50, 0.2, 3) == recs);
}

TEST_CASE("rendered sequences score as intended") {
  const auto prompts = toy_prompts(30, 0.3, 2);
  for (const auto& p : prompts) {
    CHECK(compute_reward(render_sequence(p, target_sequence(p)), p.gt).total == doctest::Approx(1.0));
    ToySequence junk = target_sequence(p);
    junk.tags[0] = static_cast<int>(StructToken::Junk);
    CHECK(compute_reward(render_sequence(p, junk), p.gt).format == 0);
  }
}

TEST_CASE("sft loss: uniform policy and a confident policy") {
  // Three candidates plus stop: every token has four choices.
  std::vector<ToyPrompt> four;
  for (const auto& p : toy_prompts(200, 0.2, 5))
    if (p.actions.size() == 4) four.push_back(p);
  REQUIRE(four.size() >= 5);
  std::vector<SftExample> batch;
  for (const auto& p : four) batch.push_back({p, target_sequence(p)});
  const auto uniform = sft_loss(ToyPolicy{}, batch);
  CHECK(uniform.value == doctest::Approx(kSequenceLength * std::log(4.0)).epsilon(1e-12));

  ToyPolicy confident = reference_separator();
  confident.theta *= 100.0;
  std::vector<SftExample> sep;
  for (const auto& p : toy_prompts(200, 0.2, 5)) sep.push_back({p, target_sequence(p)});
  CHECK(sft_loss(confident, sep).value < 1e-9);
  CHECK_THROWS_AS(sft_loss(ToyPolicy{}, std::span<const SftExample>{}), EmptyBatch);
}

TEST_CASE("sft gradient matches central finite differences") {
  Rng rng(11);
  const auto prompts = toy_prompts(16, 0.3, 12);
  std::vector<SftExample> batch;
  for (const auto& p : prompts) batch.push_back({p, target_sequence(p)});
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const ToyPolicy at = random_policy(rng);
    const auto fd = central_difference(at, [&](const ToyPolicy& q) { return sft_loss(q, batch).value; });
    const double e = rel_err(sft_loss(at, batch).gradient, fd);
    worst = std::max(worst, e);
    CHECK(e < 1e-4);
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("gspo gradient matches central finite differences") {
  Rng rng(21);
  const auto prompts = toy_prompts(12, 0.3, 22);
  double worst = 0.0;
  for (bool token_level : {false, true}) {
    for (int k = 0; k < 10; ++k) {
      RLConfig cfg;
      cfg.group_size = 4;
      cfg.beta = 0.01;
      cfg.token_level = token_level;
      const ToyPolicy old = random_policy(rng);
      ToyPolicy at = old;
      for (int i = 0; i < kToyParams; ++i) at.theta[i] += rng.normal(0.0, 0.05);
      const ToyPolicy ref = random_policy(rng);
      std::vector<GroupRollout> groups;
      for (int g = 0; g < 3; ++g) groups.push_back(sample_group(old, prompts[(k * 3 + g) % prompts.size()], cfg, rng));
      const auto fd = central_difference(at, [&](const ToyPolicy& q) { return gspo_objective(q, groups, cfg, ref).value; });
      const double e = rel_err(gspo_objective(at, groups, cfg, ref).gradient, fd);
      worst = std::max(worst, e);
      CHECK(e < 1e-4);
    }
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("group advantages") {
  const auto check = [](std::vector<double> r, std::vector<double> want) {
    const auto a = group_advantages(r);
    REQUIRE(a.size() == want.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - want[i]) < 1e-7);
  };
  check({1, 0, 0, 1}, {1, -1, -1, 1});
  check({0.5, 0.5, 0.5}, {0, 0, 0});
  check({1, 0}, {1, -1});
  CHECK_THROWS_AS(group_advantages(std::vector<double>{1.0}), GroupTooSmall);

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> r(rng.uniform_int(2, 16));
    for (auto& x : r) x = rng.uniform(0, 1);
    const auto a = group_advantages(r);
    double mean = 0.0, sq = 0.0;
    for (double x : a) mean += x;
    mean /= a.size();
    for (double x : a) sq += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::sqrt(sq / a.size()) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("sequence ratio") {
  const std::vector<double> lp{-1.0, -2.0, -0.5};
  CHECK(std::abs(sequence_ratio(lp, lp) - 1.0) < 1e-12);
  const std::vector<double> a{std::log(2.0), std::log(0.5)}, zero{0.0, 0.0};
  CHECK(std::abs(sequence_ratio(a, zero) - 1.0) < 1e-12);
  const std::vector<double> b{std::log(2.0), std::log(2.0), std::log(2.0)}, zero3{0.0, 0.0, 0.0};
  CHECK(std::abs(sequence_ratio(b, zero3) - 2.0) < 1e-12);
  CHECK_THROWS_AS(sequence_ratio(a, zero3), LengthMismatch);
  CHECK_THROWS_AS(sequence_ratio(std::vector<double>{}, std::vector<double>{}), LengthMismatch);
  // Geometric mean of token ratios.
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(5), y(5);
    double prod = 1.0;
    for (int i = 0; i < 5; ++i) {
      x[i] = rng.uniform(-3, 0);
      y[i] = rng.uniform(-3, 0);
      prod *= std::exp(x[i] - y[i]);
    }
    CHECK(sequence_ratio(x, y) == doctest::Approx(std::pow(prod, 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("gspo objective on hand-computed cases") {
  const auto prompt = toy_prompts(5, 0.0, 1).front();
  const ToyPolicy p;
  RLConfig cfg;
  cfg.beta = 0.0;

  const std::vector<GroupRollout> unit{fixed_group(prompt, p, {1.0, -1.0}, 0.0)};
  CHECK(std::abs(gspo_objective(p, unit, cfg, p).value) < 1e-12);

  // s = 1.5 for both members: min(1.5, 1.2) * 1 and min(-1.5, -1.2).
  const std::vector<GroupRollout> wide{fixed_group(prompt, p, {1.0, -1.0}, std::log(1.5))};
  const auto v = gspo_objective(p, wide, cfg, p);
  CHECK(std::abs(v.value - 0.5 * (1.2 - 1.5)) < 1e-6);
  CHECK(v.clip_fraction == doctest::Approx(0.5));
  const std::vector<GroupRollout> single{fixed_group(prompt, p, {1.0, 0.0}, std::log(1.5))};
  CHECK(std::abs(gspo_objective(p, single, cfg, p).value - 0.5 * 1.2) < 1e-6);

  RLConfig open = cfg;
  open.clip_eps = std::numeric_limits<double>::infinity();
  const auto u = gspo_objective(p, wide, open, p);
  CHECK(std::abs(u.value - 0.5 * (1.5 - 1.5)) < 1e-6);
  CHECK(u.clip_fraction == 0.0);
}

TEST_CASE("unbounded clipping gives the unclipped surrogate on sampled groups") {
  Rng rng(31);
  const auto prompts = toy_prompts(10, 0.3, 4);
  RLConfig cfg;
  cfg.beta = 0.0;
  cfg.group_size = 6;
  cfg.clip_eps = std::numeric_limits<double>::infinity();
  const ToyPolicy old = random_policy(rng);
  const ToyPolicy now = random_policy(rng);
  std::vector<GroupRollout> groups;
  for (const auto& p : prompts) groups.push_back(sample_group(old, p, cfg, rng));
  double want = 0.0;
  for (const auto& g : groups) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      const auto lp = token_logprobs(now, g.prompt, g.members[i].seq);
      s += sequence_ratio(std::span<const double>(lp.data(), lp.size()),
                          std::span<const double>(g.members[i].logp_old.data(), kSequenceLength)) *
           g.advantages[i];
    }
    want += s / g.members.size();
  }
  want /= groups.size();
  CHECK(gspo_objective(now, groups, cfg, now).value == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("at the sampling policy the gradient is REINFORCE with length-normalized log-probs") {
  Rng rng(41);
  const auto prompts = toy_prompts(6, 0.3, 6);
  RLConfig cfg;
  cfg.beta = 0.0;
  const ToyPolicy p = random_policy(rng);
  std::vector<GroupRollout> groups;
  for (const auto& pr : prompts) groups.push_back(sample_group(p, pr, cfg, rng));
  Eigen::VectorXd want = Eigen::VectorXd::Zero(kToyParams);
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      want += g.advantages[i] / g.members.size() / kSequenceLength *
              token_logprob_jacobian(p, g.prompt, g.members[i].seq).rowwise().sum();
    }
  }
  want /= groups.size();
  CHECK(rel_err(gspo_objective(p, groups, cfg, p).gradient, want) < 1e-12);
}

TEST_CASE("kl penalty vanishes at the reference and is positive elsewhere") {
  Rng rng(51);
  const auto prompts = toy_prompts(6, 0.3, 6);
  RLConfig cfg;
  const ToyPolicy p = random_policy(rng);
  std::vector<GroupRollout> groups;
  for (const auto& pr : prompts) groups.push_back(sample_group(p, pr, cfg, rng));
  CHECK(std::abs(gspo_objective(p, groups, cfg, p).kl) < 1e-15);
  CHECK(gspo_objective(p, groups, cfg, random_policy(rng)).kl > 0.0);
}

TEST_CASE("objective and config errors") {
  const auto prompt = toy_prompts(3, 0.0, 1).front();
  const ToyPolicy p;
  RLConfig cfg;
  CHECK_THROWS_AS(gspo_objective(p, std::vector<GroupRollout>{}, cfg, p), GroupTooSmall);
  CHECK_THROWS_AS(gspo_objective(p, std::vector<GroupRollout>{fixed_group(prompt, p, {1.0}, 0.0)}, cfg, p), GroupTooSmall);
  auto mismatched = fixed_group(prompt, p, {1.0, -1.0}, 0.0);
  mismatched.advantages.pop_back();
  CHECK_THROWS_AS(gspo_objective(p, std::vector<GroupRollout>{mismatched}, cfg, p), LengthMismatch);
  auto nan = fixed_group(prompt, p, {1.0, -1.0}, 0.0);
  nan.members[0].logp_old[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gspo_objective(p, std::vector<GroupRollout>{nan}, cfg, p), NonFiniteLogProb);

  RLConfig bad = cfg;
  bad.group_size = 1;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = cfg;
  bad.clip_eps = 1.5;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = cfg;
  bad.weights = {0.5, 0.6};
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = cfg;
  bad.beta = -1.0;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  CHECK_NOTHROW(validate(cfg));

  RLConfig huge = cfg;
  huge.learning_rate = 1e308;
  huge.steps = 20;
  const auto data = toy_prompts(40, 0.3, 2);
  CHECK_THROWS_AS(train_gspo(ToyPolicy{}, data, huge), Divergence);
}

TEST_CASE("training is deterministic and improves held-out reward") {
  const auto train = toy_prompts(400, 0.5, 61);
  const auto held = toy_prompts(200, 0.5, 62);
  ToyPolicy warm;
  SftConfig sft;
  sft.steps = 20;
  sft.seed = 1;
  const auto curve = train_sft(warm, train, sft);
  CHECK(curve.size() == 20);
  CHECK(curve.back().loss < curve.front().loss);

  RLConfig cfg;
  cfg.steps = 200;
  cfg.seed = 3;
  const auto a = train_gspo(warm, train, cfg);
  const auto b = train_gspo(warm, train, cfg);
  CHECK(a.policy.theta == b.policy.theta);
  CHECK(a.curve.size() == 200);
  CHECK(a.curve.back().mean_reward > a.curve.front().mean_reward);
  CHECK(evaluate_toy(a.policy, held).mean_reward > evaluate_toy(warm, held).mean_reward);
}

TEST_CASE("evaluate_toy counts stop decisions") {
  const auto prompts = toy_prompts(100, 0.3, 71);
  const auto ev = evaluate_toy(reference_separator(), prompts);
  CHECK(ev.decisions == 100);
  CHECK(ev.stop_decisions == 30);
  CHECK(ev.accuracy == doctest::Approx(1.0));
  CHECK(ev.stop_recall == doctest::Approx(1.0));
  CHECK(std::isnan(evaluate_toy(ToyPolicy{}, toy_prompts(10, 0.0, 1)).stop_recall));
}

TEST_CASE("checkpoints round-trip") {
  Rng rng(81);
  ToyPolicy p = random_policy(rng);
  p.temperature = 0.7;
  const auto path = std::filesystem::temp_directory_path() / "visor_toy_ckpt.bin";
  save_checkpoint(path, p, {{"steps", 12}});
  nlohmann::json meta;
  const ToyPolicy q = load_checkpoint(path, &meta);
  CHECK(q.theta == p.theta);
  CHECK(q.temperature == p.temperature);
  CHECK(meta["steps"] == 12);
  std::filesystem::resize_file(path, 10);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}

}  // TEST_SUITE
