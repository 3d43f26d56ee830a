#pragma once

#include "visor/dataset.hpp"
#include "visor/rng.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace visor {

// ---------------------------------------------------------------------------
// Toy sequence policy.
//
// An output is four tokens: three structure tokens followed by one action
// token. Structure positions are independent softmaxes over kStructVocab
// tokens; the action token is a softmax over the prompt's available actions
// with logits theta_a . phi(action) / temperature.

inline constexpr int kActionFeatures = 6;  // pixel x, open, keyword, -range, stop evidence, is-stop
inline constexpr int kStructPositions = 3;
inline constexpr int kStructVocab = 4;
inline constexpr int kSequenceLength = kStructPositions + 1;
inline constexpr int kToyParams = kActionFeatures + kStructPositions * kStructVocab;

enum class StructToken : int { Think = 0, ThinkSummary = 1, Action = 2, Junk = 3 };

const std::array<std::string, kActionFeatures>& feature_names();

/// One decision as the toy policy sees it.
struct ToyPrompt {
  std::string id;
  std::vector<std::string> actions;  ///< candidate letters then "stop"
  Eigen::MatrixXd features;          ///< actions x kActionFeatures
  std::string gt;                    ///< element of `actions`
  bool is_stop() const { return gt == "stop"; }
};

/// Features from the record's non-privileged evidence fields.
ToyPrompt prompt_from_record(const DecisionRecord& record);
std::vector<ToyPrompt> prompts_from_records(std::span<const DecisionRecord> records);

struct ToySequence {
  std::array<int, kStructPositions> tags{};
  int action = 0;  ///< row of ToyPrompt::features
  friend bool operator==(const ToySequence&, const ToySequence&) = default;
};

struct ToyPolicy {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(kToyParams);
  double temperature = 1.0;

  auto action_weights() const { return theta.head<kActionFeatures>(); }
  auto struct_logits(int position) const { return theta.segment<kStructVocab>(kActionFeatures + position * kStructVocab); }
};

Eigen::VectorXd action_probabilities(const ToyPolicy& policy, const ToyPrompt& prompt);
Eigen::Vector<double, kStructVocab> struct_probabilities(const ToyPolicy& policy, int position);

/// log pi(y_t | x, y_<t) per token.
Eigen::Vector<double, kSequenceLength> token_logprobs(const ToyPolicy& policy, const ToyPrompt& prompt,
                                                      const ToySequence& seq);
/// Column t is d log pi(y_t) / d theta.
Eigen::Matrix<double, kToyParams, kSequenceLength> token_logprob_jacobian(const ToyPolicy& policy,
                                                                         const ToyPrompt& prompt,
                                                                         const ToySequence& seq);

ToySequence sample_sequence(const ToyPolicy& policy, const ToyPrompt& prompt, Rng& rng);
ToySequence greedy_sequence(const ToyPolicy& policy, const ToyPrompt& prompt);
/// The well-formed answer: think, think_summary, action, gt.
ToySequence target_sequence(const ToyPrompt& prompt);
/// Tagged text for a sequence; junk tokens emit filler without tags.
std::string render_sequence(const ToyPrompt& prompt, const ToySequence& seq);

/// Weights tuned to separate the synthetic decisions; a reference point for tests.
ToyPolicy reference_separator();

// ---------------------------------------------------------------------------
// Rewards.

struct RewardWeights {
  double format = 0.1;
  double action = 0.9;
};

struct RewardBreakdown {
  int format = 0;
  int action = 0;
  double total = 0.0;
};

/// format: all three tags present. action: the <action> content normalizes to
/// the ground truth ("stop" or a letter). Never throws on bad text.
RewardBreakdown compute_reward(const std::string& text, const std::string& gt, const RewardWeights& weights = {});
RewardBreakdown compute_reward(const std::string& text, const DecisionRecord& record,
                               const RewardWeights& weights = {});

// ---------------------------------------------------------------------------
// Supervised warm-up.

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

struct SftExample {
  ToyPrompt prompt;
  ToySequence target;
};

struct LossAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// -(1/N) sum_n sum_t log pi(r_t | P, r_<t), with its gradient.
LossAndGradient sft_loss(const ToyPolicy& policy, std::span<const SftExample> batch);

struct SftConfig {
  int steps = 200;
  int batch_size = 32;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

struct SftStep {
  int step = 0;
  double loss = 0.0;
};

std::vector<SftStep> train_sft(ToyPolicy& policy, std::span<const ToyPrompt> data, const SftConfig& config);

// ---------------------------------------------------------------------------
// Group policy optimization.

class GroupTooSmall : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteLogProb : public Error {
 public:
  using Error::Error;
};

class Divergence : public Error {
 public:
  Divergence(int step, const std::string& what) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// (r_i - mean) / (population std + 1e-8).
std::vector<double> group_advantages(std::span<const double> rewards);

/// exp(mean_t(logp_new_t - logp_old_t)).
double sequence_ratio(std::span<const double> logp_new, std::span<const double> logp_old);

struct GroupMember {
  ToySequence seq;
  Eigen::Vector<double, kSequenceLength> logp_old = Eigen::Vector<double, kSequenceLength>::Zero();
  double reward = 0.0;
};

struct GroupRollout {
  ToyPrompt prompt;
  std::vector<GroupMember> members;
  std::vector<double> advantages;
};

struct RLConfig {
  double clip_eps = 0.2;
  double beta = 0.01;
  int group_size = 12;
  double learning_rate = 0.5;
  int steps = 300;
  int prompts_per_step = 8;
  int inner_epochs = 2;
  /// Steps between reference snapshots; 0 keeps the warm-start policy.
  int ref_every = 0;
  /// Per-token ratios (GRPO) instead of the length-normalized sequence ratio.
  bool token_level = false;
  RewardWeights weights;
  std::uint64_t seed = 0;
};

void validate(const RLConfig& config);

struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double surrogate = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

/// Mean over groups of (1/G) sum_i min(s_i A_i, clip(s_i) A_i), minus beta
/// times the per-token k3 estimate of KL(pi_theta || pi_ref) on the sampled
/// members. Advantages are constants.
ObjectiveValue gspo_objective(const ToyPolicy& policy, std::span<const GroupRollout> groups, const RLConfig& config,
                              const ToyPolicy& ref);

/// G samples from `old`, scored and normalized.
GroupRollout sample_group(const ToyPolicy& old, const ToyPrompt& prompt, const RLConfig& config, Rng& rng);

struct TrainStep {
  int step = 0;
  double mean_reward = 0.0;
  double stop_recall = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

struct ToyEvaluation {
  double mean_reward = 0.0;
  double accuracy = 0.0;
  double stop_recall = 0.0;  ///< NaN without stop decisions
  int decisions = 0;
  int stop_decisions = 0;
};

/// Greedy decoding on every prompt.
ToyEvaluation evaluate_toy(const ToyPolicy& policy, std::span<const ToyPrompt> prompts,
                           const RewardWeights& weights = {});

struct GspoResult {
  ToyPolicy policy;
  std::vector<TrainStep> curve;
};

/// stop_recall in the curve is the greedy recall over the training stops.
/// Throws Divergence when parameters stop being finite.
GspoResult train_gspo(const ToyPolicy& init, std::span<const ToyPrompt> data, const RLConfig& config);

void write_curve_csv(const std::filesystem::path& path, const std::vector<TrainStep>& curve);

// ---------------------------------------------------------------------------
// Synthetic decisions and checkpoints.

/// Linearly separable decisions: the ground-truth label carries the strongest
/// keyword evidence, stop decisions see the target close by.
std::vector<DecisionRecord> synthetic_records(int n, double stop_fraction, std::uint64_t seed);

/// `path` holds the raw parameters, `path` + ".json" the metadata.
void save_checkpoint(const std::filesystem::path& path, const ToyPolicy& policy, const nlohmann::json& meta = {});
ToyPolicy load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace visor
