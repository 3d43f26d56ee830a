#include "visor/learn.hpp"

#include "visor/episode.hpp"
#include "visor/image_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace visor {

using nlohmann::json;

namespace {

constexpr double kRangeScale = 5.0;

/// 1 at the target's feet, 0 from 2 m out or when no target pixels are seen.
double stop_evidence(double target_range) {
  if (!std::isfinite(target_range)) return 0.0;
  return std::clamp((2.0 - target_range) / 1.5, 0.0, 1.0);
}

template <class V>
Eigen::VectorXd softmax(const V& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

template <class V>
Eigen::VectorXd log_softmax(const V& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

Eigen::VectorXd action_logits(const ToyPolicy& policy, const ToyPrompt& prompt) {
  return prompt.features * policy.action_weights() / policy.temperature;
}

int argmax(const Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

const std::array<std::string, kActionFeatures>& feature_names() {
  static const std::array<std::string, kActionFeatures> names{"pixel_x",  "open_space",    "keyword",
                                                             "neg_range", "stop_evidence", "is_stop"};
  return names;
}

ToyPrompt prompt_from_record(const DecisionRecord& r) {
  ToyPrompt p;
  p.id = r.episode_id + "/" + std::to_string(r.step_index);
  const auto k = static_cast<Eigen::Index>(r.candidates.size());
  p.features = Eigen::MatrixXd::Zero(k + 1, kActionFeatures);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& c = r.candidates[i];
    p.actions.emplace_back(1, c.label);
    p.features(i, 0) = 2.0 * c.pixel_pos.col / (kPanoramaWidth - 1) - 1.0;
    p.features(i, 1) = i < static_cast<Eigen::Index>(r.open_space.size()) ? r.open_space[i] : 0.0;
    p.features(i, 2) = i < static_cast<Eigen::Index>(r.keyword_evidence.size()) ? r.keyword_evidence[i] : 0.0;
    p.features(i, 3) = -std::min(floor_range(c.pixel_pos.row), kRangeScale) / kRangeScale;
  }
  p.actions.emplace_back("stop");
  p.features(k, 4) = stop_evidence(r.target_range);
  p.features(k, 5) = 1.0;
  p.gt = r.gt_label;
  if (std::find(p.actions.begin(), p.actions.end(), p.gt) == p.actions.end()) {
    throw Error("record " + p.id + " has ground truth '" + p.gt + "' outside its candidates");
  }
  return p;
}

std::vector<ToyPrompt> prompts_from_records(std::span<const DecisionRecord> records) {
  std::vector<ToyPrompt> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(prompt_from_record(r));
  return out;
}

Eigen::VectorXd action_probabilities(const ToyPolicy& policy, const ToyPrompt& prompt) {
  return softmax(action_logits(policy, prompt));
}

Eigen::Vector<double, kStructVocab> struct_probabilities(const ToyPolicy& policy, int position) {
  return softmax(policy.struct_logits(position));
}

Eigen::Vector<double, kSequenceLength> token_logprobs(const ToyPolicy& policy, const ToyPrompt& prompt,
                                                      const ToySequence& seq) {
  Eigen::Vector<double, kSequenceLength> out;
  for (int j = 0; j < kStructPositions; ++j) out[j] = log_softmax(policy.struct_logits(j))[seq.tags[j]];
  out[kStructPositions] = log_softmax(action_logits(policy, prompt))[seq.action];
  return out;
}

Eigen::Matrix<double, kToyParams, kSequenceLength> token_logprob_jacobian(const ToyPolicy& policy,
                                                                         const ToyPrompt& prompt,
                                                                         const ToySequence& seq) {
  Eigen::Matrix<double, kToyParams, kSequenceLength> jac = Eigen::Matrix<double, kToyParams, kSequenceLength>::Zero();
  for (int j = 0; j < kStructPositions; ++j) {
    Eigen::Vector<double, kStructVocab> g = -struct_probabilities(policy, j);
    g[seq.tags[j]] += 1.0;
    jac.block<kStructVocab, 1>(kActionFeatures + j * kStructVocab, j) = g;
  }
  const Eigen::VectorXd p = action_probabilities(policy, prompt);
  const Eigen::VectorXd mean_phi = prompt.features.transpose() * p;
  jac.block<kActionFeatures, 1>(0, kStructPositions) =
      (prompt.features.row(seq.action).transpose() - mean_phi) / policy.temperature;
  return jac;
}

ToySequence sample_sequence(const ToyPolicy& policy, const ToyPrompt& prompt, Rng& rng) {
  ToySequence seq;
  for (int j = 0; j < kStructPositions; ++j) {
    const auto p = struct_probabilities(policy, j);
    seq.tags[j] = static_cast<int>(rng.categorical(std::span<const double>(p.data(), kStructVocab)));
  }
  const Eigen::VectorXd p = action_probabilities(policy, prompt);
  seq.action = static_cast<int>(rng.categorical(std::span<const double>(p.data(), p.size())));
  return seq;
}

ToySequence greedy_sequence(const ToyPolicy& policy, const ToyPrompt& prompt) {
  ToySequence seq;
  for (int j = 0; j < kStructPositions; ++j) seq.tags[j] = argmax(policy.struct_logits(j));
  seq.action = argmax(action_logits(policy, prompt));
  return seq;
}

ToySequence target_sequence(const ToyPrompt& prompt) {
  ToySequence seq;
  seq.tags = {static_cast<int>(StructToken::Think), static_cast<int>(StructToken::ThinkSummary),
              static_cast<int>(StructToken::Action)};
  seq.action = static_cast<int>(std::find(prompt.actions.begin(), prompt.actions.end(), prompt.gt) - prompt.actions.begin());
  return seq;
}

std::string render_sequence(const ToyPrompt& prompt, const ToySequence& seq) {
  const std::string& action = prompt.actions.at(seq.action);
  std::string text;
  for (int tag : seq.tags) {
    switch (static_cast<StructToken>(tag)) {
      case StructToken::Think:
        text += "<think>Weighing color evidence and open floor around each label.</think>";
        break;
      case StructToken::ThinkSummary:
        text += "<think_summary>" + action + " scores highest.</think_summary>";
        break;
      case StructToken::Action:
        text += "<action>" + action + "</action>";
        break;
      case StructToken::Junk:
        text += "...";
        break;
    }
  }
  return text;
}

ToyPolicy reference_separator() {
  ToyPolicy p;
  p.theta.head<kActionFeatures>() << 0.0, 0.0, 10.0, 0.0, 20.0, -3.0;
  for (int j = 0; j < kStructPositions; ++j) p.theta[kActionFeatures + j * kStructVocab + j] = 5.0;
  return p;
}

// ---------------------------------------------------------------------------

RewardBreakdown compute_reward(const std::string& text, const std::string& gt, const RewardWeights& weights) {
  RewardBreakdown r;
  const auto action = extract_tag(text, "action");
  r.format = extract_tag(text, "think") && extract_tag(text, "think_summary") && action ? 1 : 0;
  if (action) {
    try {
      const HighLevelDecision d = normalize_action(*action);
      const HighLevelDecision expected = gt == "stop" ? HighLevelDecision::stop()
                                                      : HighLevelDecision::go_to(gt.empty() ? '?' : gt[0]);
      r.action = d == expected ? 1 : 0;
    } catch (const ParseError&) {
      r.action = 0;
    }
  }
  r.total = weights.format * r.format + weights.action * r.action;
  return r;
}

RewardBreakdown compute_reward(const std::string& text, const DecisionRecord& record, const RewardWeights& weights) {
  return compute_reward(text, record.gt_label, weights);
}

// ---------------------------------------------------------------------------

LossAndGradient sft_loss(const ToyPolicy& policy, std::span<const SftExample> batch) {
  if (batch.empty()) throw EmptyBatch("sft batch is empty");
  LossAndGradient out;
  out.gradient = Eigen::VectorXd::Zero(kToyParams);
  for (const auto& ex : batch) {
    out.value -= token_logprobs(policy, ex.prompt, ex.target).sum();
    out.gradient -= token_logprob_jacobian(policy, ex.prompt, ex.target).rowwise().sum();
  }
  const double n = static_cast<double>(batch.size());
  out.value /= n;
  out.gradient /= n;
  return out;
}

std::vector<SftStep> train_sft(ToyPolicy& policy, std::span<const ToyPrompt> data, const SftConfig& config) {
  if (data.empty()) throw EmptyBatch("no sft data");
  if (config.batch_size < 1 || config.steps < 0 || !(config.learning_rate > 0.0)) {
    throw InvalidConfig("sft needs batch_size >= 1, steps >= 0 and a positive learning rate");
  }
  Rng rng(config.seed);
  std::vector<SftStep> curve;
  std::vector<SftExample> batch(static_cast<std::size_t>(config.batch_size));
  for (int step = 0; step < config.steps; ++step) {
    for (auto& ex : batch) {
      ex.prompt = data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
      ex.target = target_sequence(ex.prompt);
    }
    const LossAndGradient lg = sft_loss(policy, batch);
    policy.theta -= config.learning_rate * lg.gradient;
    if (!policy.theta.allFinite()) throw Divergence(step, "sft parameters diverged at step " + std::to_string(step));
    curve.push_back({step, lg.value});
  }
  return curve;
}

// ---------------------------------------------------------------------------

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw GroupTooSmall("a group needs at least two members");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / (sd + 1e-8));
  return out;
}

double sequence_ratio(std::span<const double> logp_new, std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size() || logp_new.empty()) {
    throw LengthMismatch("log-prob sequences differ in length or are empty");
  }
  double s = 0.0;
  for (std::size_t t = 0; t < logp_new.size(); ++t) s += logp_new[t] - logp_old[t];
  return std::exp(s / static_cast<double>(logp_new.size()));
}

void validate(const RLConfig& c) {
  if (!(c.clip_eps > 0.0 && c.clip_eps < 1.0) && !std::isinf(c.clip_eps)) throw InvalidConfig("clip_eps must be in (0, 1)");
  if (!(c.beta >= 0.0)) throw InvalidConfig("beta must be >= 0");
  if (c.group_size < 2) throw InvalidConfig("group_size must be >= 2");
  if (!(c.learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (c.steps < 0 || c.prompts_per_step < 1 || c.inner_epochs < 1 || c.ref_every < 0) {
    throw InvalidConfig("steps, prompts_per_step, inner_epochs or ref_every out of range");
  }
  if (c.weights.format < 0.0 || c.weights.action < 0.0 || std::abs(c.weights.format + c.weights.action - 1.0) > 1e-12) {
    throw InvalidConfig("reward weights must be non-negative and sum to 1");
  }
}

ObjectiveValue gspo_objective(const ToyPolicy& policy, std::span<const GroupRollout> groups, const RLConfig& config,
                              const ToyPolicy& ref) {
  if (groups.empty()) throw GroupTooSmall("no groups");
  ObjectiveValue out;
  out.gradient = Eigen::VectorXd::Zero(kToyParams);
  Eigen::VectorXd kl_grad = Eigen::VectorXd::Zero(kToyParams);
  const double lo = 1.0 - config.clip_eps, hi = 1.0 + config.clip_eps;
  int clipped = 0, total = 0;
  constexpr double inv_len = 1.0 / kSequenceLength;

  for (const auto& g : groups) {
    const auto n = g.members.size();
    if (n < 2) throw GroupTooSmall("a group needs at least two members");
    if (g.advantages.size() != n) throw LengthMismatch("advantages do not match group members");
    const double inv_g = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = g.members[i];
      const double a = g.advantages[i];
      const auto lp = token_logprobs(policy, g.prompt, m.seq);
      const auto lref = token_logprobs(ref, g.prompt, m.seq);
      if (!lp.allFinite() || !lref.allFinite() || !m.logp_old.allFinite()) {
        throw NonFiniteLogProb("non-finite log-probability in group " + g.prompt.id);
      }
      const auto jac = token_logprob_jacobian(policy, g.prompt, m.seq);

      if (!config.token_level) {
        const double s = std::exp((lp - m.logp_old).mean());
        const double unclipped = s * a;
        const double clip = std::clamp(s, lo, hi) * a;
        ++total;
        if (unclipped <= clip) {
          out.surrogate += inv_g * unclipped;
          out.gradient += inv_g * a * s * inv_len * jac.rowwise().sum();
        } else {
          out.surrogate += inv_g * clip;
          ++clipped;
        }
      } else {
        for (int t = 0; t < kSequenceLength; ++t) {
          const double r = std::exp(lp[t] - m.logp_old[t]);
          const double unclipped = r * a;
          const double clip = std::clamp(r, lo, hi) * a;
          ++total;
          if (unclipped <= clip) {
            out.surrogate += inv_g * inv_len * unclipped;
            out.gradient += inv_g * inv_len * a * r * jac.col(t);
          } else {
            out.surrogate += inv_g * inv_len * clip;
            ++clipped;
          }
        }
      }

      // k3 estimator: exp(d) - d - 1 with d = log pi_ref - log pi_theta.
      const Eigen::Vector<double, kSequenceLength> d = lref - lp;
      out.kl += inv_g * inv_len * (d.array().exp() - d.array() - 1.0).sum();
      kl_grad += inv_g * inv_len * jac * (1.0 - d.array().exp()).matrix();
    }
  }
  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  out.surrogate *= inv_groups;
  out.kl *= inv_groups;
  out.gradient = inv_groups * (out.gradient - config.beta * kl_grad);
  out.value = out.surrogate - config.beta * out.kl;
  out.clip_fraction = total ? static_cast<double>(clipped) / total : 0.0;
  return out;
}

GroupRollout sample_group(const ToyPolicy& old, const ToyPrompt& prompt, const RLConfig& config, Rng& rng) {
  GroupRollout g;
  g.prompt = prompt;
  std::vector<double> rewards;
  for (int i = 0; i < config.group_size; ++i) {
    GroupMember m;
    m.seq = sample_sequence(old, prompt, rng);
    m.logp_old = token_logprobs(old, prompt, m.seq);
    m.reward = compute_reward(render_sequence(prompt, m.seq), prompt.gt, config.weights).total;
    rewards.push_back(m.reward);
    g.members.push_back(std::move(m));
  }
  g.advantages = group_advantages(rewards);
  return g;
}

ToyEvaluation evaluate_toy(const ToyPolicy& policy, std::span<const ToyPrompt> prompts, const RewardWeights& weights) {
  ToyEvaluation ev;
  int correct = 0, stops_hit = 0;
  for (const auto& p : prompts) {
    const ToySequence seq = greedy_sequence(policy, p);
    const RewardBreakdown r = compute_reward(render_sequence(p, seq), p.gt, weights);
    ev.mean_reward += r.total;
    correct += r.action;
    if (p.is_stop()) {
      ++ev.stop_decisions;
      stops_hit += p.actions[seq.action] == "stop";
    }
  }
  ev.decisions = static_cast<int>(prompts.size());
  if (ev.decisions > 0) {
    ev.mean_reward /= ev.decisions;
    ev.accuracy = static_cast<double>(correct) / ev.decisions;
  }
  ev.stop_recall = ev.stop_decisions > 0 ? static_cast<double>(stops_hit) / ev.stop_decisions
                                         : std::numeric_limits<double>::quiet_NaN();
  return ev;
}

GspoResult train_gspo(const ToyPolicy& init, std::span<const ToyPrompt> data, const RLConfig& config) {
  validate(config);
  if (data.empty()) throw EmptyBatch("no training prompts");
  std::vector<ToyPrompt> stops;
  for (const auto& p : data) {
    if (p.is_stop()) stops.push_back(p);
  }

  GspoResult res{init, {}};
  ToyPolicy& policy = res.policy;
  ToyPolicy ref = init;
  Rng rng(config.seed);
  for (int step = 0; step < config.steps; ++step) {
    if (config.ref_every > 0 && step > 0 && step % config.ref_every == 0) ref = policy;
    const ToyPolicy old = policy;
    std::vector<GroupRollout> groups;
    double reward = 0.0;
    for (int b = 0; b < config.prompts_per_step; ++b) {
      const auto& prompt = data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
      groups.push_back(sample_group(old, prompt, config, rng));
      for (const auto& m : groups.back().members) reward += m.reward;
    }
    ObjectiveValue obj;
    for (int e = 0; e < config.inner_epochs; ++e) {
      obj = gspo_objective(policy, groups, config, ref);
      policy.theta += config.learning_rate * obj.gradient;
      if (!policy.theta.allFinite()) {
        throw Divergence(step, "policy parameters diverged at step " + std::to_string(step));
      }
    }
    TrainStep ts;
    ts.step = step;
    ts.mean_reward = reward / (config.prompts_per_step * config.group_size);
    ts.stop_recall = evaluate_toy(policy, stops, config.weights).stop_recall;
    ts.kl = obj.kl;
    ts.clip_fraction = obj.clip_fraction;
    res.curve.push_back(ts);
    spdlog::debug("gspo step {} reward {:.3f} stop recall {:.3f} kl {:.4f}", step, ts.mean_reward, ts.stop_recall, ts.kl);
  }
  return res;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<TrainStep>& curve) {
  std::string out = "step,mean_reward,stop_recall,kl,clip_fraction\n";
  char line[160];
  for (const auto& s : curve) {
    std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g\n", s.step, s.mean_reward, s.stop_recall, s.kl,
                  s.clip_fraction);
    out += line;
  }
  write_text(path, out);
}

// ---------------------------------------------------------------------------

std::vector<DecisionRecord> synthetic_records(int n, double stop_fraction, std::uint64_t seed) {
  if (n < 0 || !(stop_fraction >= 0.0 && stop_fraction <= 1.0)) throw InvalidConfig("bad synthetic record request");
  // Exact stop count, spread by a seeded shuffle.
  std::vector<char> is_stop(static_cast<std::size_t>(n), 0);
  const int n_stop = static_cast<int>(std::lround(stop_fraction * n));
  std::fill(is_stop.begin(), is_stop.begin() + n_stop, 1);
  Rng order(seed);
  order.shuffle(std::span<char>(is_stop));

  std::vector<DecisionRecord> out;
  out.reserve(is_stop.size());
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i) + 1));
    DecisionRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "syn_%05d", i);
    r.episode_id = id;
    r.seed = derive_seed(seed, static_cast<std::uint64_t>(i) + 1);
    r.instruction = "Find the red chair near the table and stop next to it.";
    const int k = rng.uniform_int(2, 6);
    std::array<char, 26> letters{};
    std::iota(letters.begin(), letters.end(), 'A');
    rng.shuffle(std::span<char>(letters));
    const int gt = rng.uniform_int(0, k - 1);
    for (int c = 0; c < k; ++c) {
      CandidateInfo info;
      info.label = letters[c];
      info.pixel_pos = {rng.uniform_int(150, 240), rng.uniform_int(kLabelRadius, kPanoramaWidth - 1 - kLabelRadius)};
      info.cluster_size = rng.uniform_int(5, 400);
      r.candidates.push_back(info);
      r.open_space.push_back(rng.uniform());
      if (is_stop[i]) {
        r.keyword_evidence.push_back(rng.uniform());
      } else {
        r.keyword_evidence.push_back(c == gt ? rng.uniform(0.55, 1.0) : rng.uniform(0.0, 0.45));
      }
    }
    if (is_stop[i]) {
      r.gt_label = "stop";
      r.target_range = rng.uniform(0.5, 0.95);
      r.distance_to_goal = rng.uniform(0.3, 0.99);
    } else {
      r.gt_label = std::string(1, letters[gt]);
      r.target_range = rng.bernoulli(0.5) ? std::numeric_limits<double>::infinity() : rng.uniform(1.5, 6.0);
      r.distance_to_goal = rng.uniform(1.0, 10.0);
    }
    for (auto& c : r.candidates) {
      c.geodesic_to_target = r.distance_to_goal + (std::string(1, c.label) == r.gt_label ? -0.5 : rng.uniform(0.0, 3.0));
      if (std::string(1, c.label) != r.gt_label) r.distractors.emplace_back(1, c.label);
    }
    r.trace = {"Label evidence compared.", "Choosing " + r.gt_label + ".", r.gt_label};
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'V', 'T', 'O', 'Y'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::filesystem::path meta_path(const std::filesystem::path& p) { return p.string() + ".json"; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ToyPolicy& policy, const json& meta) {
  Bytes data(4 + 4 + 4 + 8 + 8 * static_cast<std::size_t>(policy.theta.size()));
  std::uint8_t* p = data.data();
  const auto put = [&p](const void* src, std::size_t n) {
    std::memcpy(p, src, n);
    p += n;
  };
  const auto n = static_cast<std::uint32_t>(policy.theta.size());
  put(kCheckpointMagic, 4);
  put(&kCheckpointVersion, 4);
  put(&n, 4);
  put(&policy.temperature, 8);
  put(policy.theta.data(), 8 * static_cast<std::size_t>(n));
  write_file(path, data);

  json doc = meta.is_object() ? meta : json::object();
  doc["version"] = kCheckpointVersion;
  doc["params"] = n;
  doc["temperature"] = policy.temperature;
  doc["features"] = feature_names();
  doc["struct_positions"] = kStructPositions;
  doc["struct_vocab"] = {"think", "think_summary", "action", "junk"};
  write_text(meta_path(path), doc.dump(2) + "\n");
}

ToyPolicy load_checkpoint(const std::filesystem::path& path, json* meta) {
  const Bytes data = read_file(path);
  if (data.size() < 20 || std::memcmp(data.data(), kCheckpointMagic, 4) != 0) {
    throw Error("not a toy policy checkpoint: " + path.string());
  }
  std::uint32_t version = 0, n = 0;
  ToyPolicy policy;
  std::memcpy(&version, data.data() + 4, 4);
  std::memcpy(&n, data.data() + 8, 4);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  if (n != kToyParams || data.size() != 20 + 8 * static_cast<std::size_t>(n)) {
    throw Error("checkpoint size does not match the toy policy");
  }
  std::memcpy(&policy.temperature, data.data() + 12, 8);
  std::memcpy(policy.theta.data(), data.data() + 20, 8 * static_cast<std::size_t>(n));
  if (meta != nullptr && std::filesystem::exists(meta_path(path))) *meta = json::parse(read_text(meta_path(path)));
  return policy;
}

}  // namespace visor
