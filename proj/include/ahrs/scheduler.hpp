#pragma once

// Scheduler-side machinery: prompt construction for rule selection, rule
// repository generation and auxiliary-reward generation; response parsing of
// the `~[n]~` protocol; and the pluggable selector driven at every tick.

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ahrs/common.hpp"
#include "ahrs/estimation.hpp"
#include "ahrs/llm_client.hpp"
#include "ahrs/rules.hpp"

namespace ahrs {

struct SelectionContext {
  std::string task_desc;
  std::string env_desc;
  std::string reward_desc;
  std::string rules_block;
  BranchStats stats;
  StatsHistory history{5};
  std::optional<int> prev_rule;
  std::optional<WeightVector> prev_weights;
};

namespace detail {

inline std::string render_array(const std::vector<double>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_sig(v[i], 6);
  }
  return s + "]";
}

inline const char* kSectionBreak = "====================================\n";

}  // namespace detail

inline std::string build_selection_prompt(const SelectionContext& ctx) {
  using detail::kSectionBreak;
  std::string p;
  p += "Rules' selection\n";
  p += "I have an optimization problem in reinforcement learning (RL) that "
       "I'd like you to solve. Please use your advanced problem-solving and "
       "analytical skills to provide a thorough and accurate solution.\n";
  p += "Here is the optimization problem you need to solve:\n";
  p += kSectionBreak;
  p += "Task description: " + ctx.task_desc + "\n\n";
  p += "Their physical meanings are as follows:\n\n";
  p += ctx.reward_desc + "\n\n";
  p += "During different training stages, the importance of each reward "
       "component varies. Therefore, learning to adjust the weights of these "
       "components at different stages is crucial for more efficient policy "
       "training.\n";
  p += kSectionBreak;
  p += "Algorithm framework: The algorithm framework builds on Proximal "
       "Policy Optimization (PPO) but decomposes the total reward into "
       "several components, each learned by an independent value branch. "
       "During policy optimization every branch is assigned a priority "
       "weight computed by a weight generation rule.\n";
  p += kSectionBreak;
  p += "Environment description:\n" + ctx.env_desc + "\n\n";
  p += "I'll provide arrays representing the mean returns, variance returns "
       "and weights obtained by each reward component in both the current "
       "and historical epochs.\n";
  p += kSectionBreak;
  p += "Goal:\n";
  p += "Please refer to the provided mean returns, variance returns, and "
       "weights for each reward component. Think step-by-step and consider "
       "the importance of each reward in improving the policy. Based on "
       "these datas, determine the best rule for generating weights that "
       "will benefit the current training epoch. You need to take into "
       "account the advantages and disadvantages of these rules.\n";
  p += kSectionBreak;
  p += "Proposed rules:\n" + ctx.rules_block;
  p += "You need to choose the best method from the given options and tell "
       "me its serial number.\n";
  p += kSectionBreak;
  p += "Additional Context:\n";
  p += "You provided a suggestion for generating weights 100 epochs ago, and "
       "I used this suggestion to generate the weight coefficients. Consider "
       "this historical information when choosing the rules to generate "
       "weights for the current training stage.\n";
  p += "Previous rule: " +
       (ctx.prev_rule ? std::to_string(*ctx.prev_rule)
                      : std::string("none")) +
       "\n";
  p += "Previous weights: " +
       (ctx.prev_weights ? detail::render_array(ctx.prev_weights->weights)
                         : std::string("none")) +
       "\n";
  p += kSectionBreak;
  p += "Output Format:\n";
  p += "Use the tilde symbol (~) at the beginning and end of the output "
       "serial number.\n";
  p += "**Ensure the output is an integer and one of 1, 2, 3, 4, 5, 6, 7 or "
       "8.**\n";
  p += "Example: ~[1]~\n";
  p += kSectionBreak;
  p += "Current Data:\n";
  p += "Mean Returns: " + detail::render_array(ctx.stats.means) + "\n";
  p += "Variance Returns: " + detail::render_array(ctx.stats.vars) + "\n";
  p += kSectionBreak;
  p += "Historical Mean Returns and Variance Returns (every 100 epochs):\n";
  if (ctx.history.empty()) {
    p += "none\n";
  } else {
    for (size_t i = 0; i < ctx.history.size(); ++i) {
      const BranchStats& h = ctx.history[i];
      p += strprintf("epoch %lu: ", h.epoch);
      p += "Mean Returns: " + detail::render_array(h.means);
      p += ", Variance Returns: " + detail::render_array(h.vars) + "\n";
    }
  }
  return p;
}

// AHRS-D variant: same context, but the model emits the weights directly.
inline std::string build_direct_weights_prompt(const SelectionContext& ctx) {
  using detail::kSectionBreak;
  size_t branches = ctx.stats.means.size();
  std::string p;
  p += "Direct weight generation\n";
  p += "I have an optimization problem in reinforcement learning (RL) that "
       "I'd like you to solve. Please use your advanced problem-solving and "
       "analytical skills to provide a thorough and accurate solution.\n";
  p += kSectionBreak;
  p += "Task description: " + ctx.task_desc + "\n\n";
  p += "Their physical meanings are as follows:\n\n";
  p += ctx.reward_desc + "\n";
  p += kSectionBreak;
  p += "Environment description:\n" + ctx.env_desc + "\n";
  p += kSectionBreak;
  p += "Goal:\n";
  p += "Assign a priority weight to each reward component for the current "
       "training stage, based on the mean returns, variance returns, and "
       "historical data below. Higher weight means the component contributes "
       "more to the policy gradient.\n";
  p += kSectionBreak;
  p += "Output Format:\n";
  p += "Use the tilde symbol (~) at the beginning and end of the output.\n";
  p += strprintf(
      "**Ensure the output is a comma-separated list of exactly %zu real "
      "numbers, each between 0.5 and 1.0.**\n",
      branches);
  p += "Example: ~[0.5, 0.75, 1.0]~\n";
  p += kSectionBreak;
  p += "Current Data:\n";
  p += "Mean Returns: " + detail::render_array(ctx.stats.means) + "\n";
  p += "Variance Returns: " + detail::render_array(ctx.stats.vars) + "\n";
  p += kSectionBreak;
  p += "Historical Mean Returns and Variance Returns (every 100 epochs):\n";
  if (ctx.history.empty()) {
    p += "none\n";
  } else {
    for (size_t i = 0; i < ctx.history.size(); ++i) {
      const BranchStats& h = ctx.history[i];
      p += strprintf("epoch %lu: ", h.epoch);
      p += "Mean Returns: " + detail::render_array(h.means);
      p += ", Variance Returns: " + detail::render_array(h.vars) + "\n";
    }
  }
  return p;
}

inline std::string build_repo_prompt(const std::string& task_desc,
                                     const std::string& env_desc,
                                     const std::string& reward_desc) {
  using detail::kSectionBreak;
  require(!task_desc.empty() && !env_desc.empty() && !reward_desc.empty(),
          Errc::invalid_value, "descriptions must be non-empty");
  std::string p;
  p += "Build rule repository\n";
  p += "I have an optimization problem in reinforcement learning (RL) that "
       "I'd like you to solve. Please use your advanced problem-solving and "
       "analytical skills to provide a thorough and accurate solution.\n";
  p += "Here is the optimization problem you need to solve:\n";
  p += kSectionBreak;
  p += "Task description: You are an expert in reinforcement learning "
       "algorithms and need to figure out how to adjust the weight "
       "coefficients of different reward components during training to "
       "enhance performance. " + task_desc + "\n";
  p += kSectionBreak;
  p += "Algorithm framework: The algorithm framework builds on Proximal "
       "Policy Optimization (PPO) but decomposes the total reward into "
       "several components, each learned by an independent value branch. "
       "During policy optimization every branch is assigned a priority "
       "weight computed by a weight generation rule.\n";
  p += kSectionBreak;
  p += "Environment description:\n" + env_desc + "\n\n";
  p += "Explanation for each reward component of the reward function:\n";
  p += reward_desc + "\n";
  p += kSectionBreak;
  p += "Think step by step, your goal is to write at least six useful weight "
       "generation rules (mathematical representation) to generate weight "
       "coefficients that will help the agent learn the task described in "
       "text, each with a short explanation of when it helps.\n";
  p += kSectionBreak;
  p += "When you write your weight generation rule, assume that your inputs "
       "are mean returns and var returns, which come from each reward "
       "component, plus their recent history.\n\n";
  p += "I will give an example and you can refer to this example to provide "
       "a better weight generation rule:\n\n";
  p += "(HDPG's rule)\n";
  p += "score = mean_returns - previous_mean_returns\n";
  p += "Prioritize components whose returns accumulate fastest.\n\n";
  p += "Some tips may be helpful for you: You can consider adding simple "
       "hyper-parameters, or tweaking the normalization method.\n";
  return p;
}

inline std::string build_aux_prompt(const std::string& task_desc,
                                    const std::string& env_desc,
                                    const std::string& reward_desc,
                                    const std::vector<std::string>& variables) {
  using detail::kSectionBreak;
  require(!task_desc.empty() && !env_desc.empty() && !reward_desc.empty(),
          Errc::invalid_value, "descriptions must be non-empty");
  std::string p;
  p += "Add Auxiliary reward\n";
  p += "You are an expert in reinforcement learning algorithms. You should "
       "help me write a proper auxiliary reward to train an agent with "
       "reinforcement learning to complete the described task.\n";
  p += kSectionBreak;
  p += "Task description and Reward function: " + task_desc + "\n\n";
  p += "Here are the reward components for the task:\n";
  p += reward_desc + "\n";
  p += kSectionBreak;
  p += "Environment description:\n" + env_desc + "\n";
  p += kSectionBreak;
  p += "Reward function requirements:\n";
  p += "You should write an auxiliary reward based on the reward components "
       "I gave to help the agent perform its task better.\n";
  p += "The auxiliary reward you add must not change the original reward "
       "components, but rather add on top of them.\n";
  p += kSectionBreak;
  p += "Output Requirements:\n";
  p += "1. The auxiliary reward must be a single arithmetic expression over "
       "the named variables listed below.\n";
  p += "2. Allowed operators: + - * / ^ and unary minus, with ^ "
       "right-associative and binding tighter than unary minus. Allowed "
       "functions: exp(x), log(x), tanh(x), abs(x), sqrt(x), min(a,b), "
       "max(a,b), clamp(x,lo,hi).\n";
  p += "3. Available variables (evaluated on the observation after each "
       "step): ";
  for (size_t i = 0; i < variables.size(); ++i) {
    if (i) p += ", ";
    p += variables[i];
  }
  p += "\n";
  p += "4. Output the expression only. Do not output anything else.\n";
  return p;
}

// First occurrence of ~[n]~ (whitespace tolerated inside the brackets).
inline int parse_rule_choice(const std::string& response) {
  static const std::regex pattern(R"(~\[\s*([+-]?\d+)\s*\]~)");
  std::smatch m;
  if (!std::regex_search(response, m, pattern))
    fail(Errc::no_match, "no ~[n]~ token in response");
  long value = 0;
  try {
    value = std::stol(m[1].str());
  } catch (const std::exception&) {
    fail(Errc::out_of_range, m[1].str());
  }
  require(value >= 1 && value <= 8, Errc::out_of_range,
          strprintf("rule %ld not in 1..8", value));
  return static_cast<int>(value);
}

// First occurrence of ~[w1, w2, ...]~; values clamped into [0.5, 1.0].
inline WeightVector parse_direct_weights(const std::string& response,
                                         size_t branch_count) {
  require(branch_count >= 1, Errc::invalid_value, "branch_count");
  static const std::regex pattern(R"(~\[([^\]]*)\]~)");
  std::smatch m;
  if (!std::regex_search(response, m, pattern))
    fail(Errc::no_match, "no ~[w1, ...]~ token in response");

  std::vector<double> values;
  std::string contents = m[1].str();
  size_t pos = 0;
  while (pos <= contents.size()) {
    size_t comma = contents.find(',', pos);
    std::string tok = contents.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    size_t a = tok.find_first_not_of(" \t\r\n");
    size_t b = tok.find_last_not_of(" \t\r\n");
    if (a == std::string::npos)
      fail(Errc::no_match, "empty entry in weight list");
    tok = tok.substr(a, b - a + 1);
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
      fail(Errc::no_match, "malformed number '" + tok + "'");
    require(std::isfinite(v), Errc::non_finite_value, tok);
    values.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  require(values.size() == branch_count, Errc::count_mismatch,
          strprintf("got %zu weights, expected %zu", values.size(),
                    branch_count));
  WeightVector w;
  w.rule_id = -1;
  w.weights = values;
  for (double& v : w.weights) v = std::min(std::max(v, 0.5), 1.0);
  return w;
}

// ---------------------------------------------------------------------------
// Selector
// ---------------------------------------------------------------------------

enum class SelectorVariant {
  llm,           // build prompt, query the client, parse ~[n]~
  scripted,      // cycle a fixed id sequence
  random,        // uniform over 1..8 from a dedicated stream
  fixed,         // constant id
  direct_llm,    // query the client for weights directly (no rule)
};

struct SelectorConfig {
  SelectorVariant variant = SelectorVariant::fixed;
  std::vector<int> script;
  int fixed_rule = 8;
  std::uint64_t seed = 0;
  std::string model = "gpt-4o";
  std::string system_prompt =
      "You are an expert in reinforcement learning algorithms.";
  double temperature = 0.0;
  int max_tokens = 256;
  double timeout_s = 60.0;
};

struct SelectionResult {
  bool is_direct = false;
  int rule_id = 0;         // valid when !is_direct
  WeightVector direct;     // valid when is_direct
  bool llm_failed = false; // transport or parse failure resolved by fallback
  std::string response;    // raw response when an llm variant ran
};

class Selector {
 public:
  Selector(SelectorConfig config, ChatClient* client)
      : config_(std::move(config)), client_(client), rng_(config_.seed) {
    if (config_.variant == SelectorVariant::scripted)
      require(!config_.script.empty(), Errc::invalid_value,
              "scripted selector needs a non-empty sequence");
    if (config_.variant == SelectorVariant::fixed)
      require(config_.fixed_rule >= 1 && config_.fixed_rule <= 8,
              Errc::unknown_rule, "fixed rule id");
    if (config_.variant == SelectorVariant::llm ||
        config_.variant == SelectorVariant::direct_llm)
      require(client_ != nullptr, Errc::missing_llm_handle,
              "llm selector without a chat client");
  }

  // One scheduler tick. `epoch` is 1-based and only used to annotate
  // transcript records.
  SelectionResult select(const SelectionContext& ctx, long epoch) {
    long tick = invocations_++;
    SelectionResult result;
    switch (config_.variant) {
      case SelectorVariant::fixed:
        result.rule_id = config_.fixed_rule;
        break;
      case SelectorVariant::scripted:
        result.rule_id =
            config_.script[static_cast<size_t>(tick) % config_.script.size()];
        break;
      case SelectorVariant::random:
        result.rule_id = 1 + static_cast<int>(rng_.below(8));
        break;
      case SelectorVariant::llm:
        result = select_via_llm(ctx, tick, epoch);
        break;
      case SelectorVariant::direct_llm:
        result = select_direct(ctx, tick, epoch);
        break;
    }
    if (!result.is_direct) prev_rule_ = result.rule_id;
    return result;
  }

  long invocations() const { return invocations_; }
  std::optional<int> prev_rule() const { return prev_rule_; }
  std::optional<WeightVector> prev_weights() const { return prev_weights_; }
  void note_applied_weights(const WeightVector& w) { prev_weights_ = w; }

 private:
  ChatRequest make_request(std::string prompt) const {
    ChatRequest req;
    req.model = config_.model;
    req.system = config_.system_prompt;
    req.user = std::move(prompt);
    req.temperature = config_.temperature;
    req.max_tokens = config_.max_tokens;
    req.timeout_s = config_.timeout_s;
    return req;
  }

  void commit_record(long tick, long epoch, const std::string& parsed,
                     bool failed) {
    if (auto* rec = dynamic_cast<RecordingClient*>(client_))
      rec->commit(tick, epoch, parsed, failed);
  }

  SelectionResult select_via_llm(const SelectionContext& ctx, long tick,
                                 long epoch) {
    SelectionResult result;
    ChatOutcome outcome = client_->chat(make_request(build_selection_prompt(ctx)));
    result.response = outcome.text;
    if (outcome.ok()) {
      try {
        result.rule_id = parse_rule_choice(outcome.text);
        commit_record(tick, epoch, std::to_string(result.rule_id), false);
        return result;
      } catch (const Error&) {
        // fall through to fallback
      }
    }
    result.rule_id = prev_rule_.value_or(1);
    result.llm_failed = true;
    commit_record(tick, epoch, std::to_string(result.rule_id), true);
    return result;
  }

  SelectionResult select_direct(const SelectionContext& ctx, long tick,
                                long epoch) {
    SelectionResult result;
    result.is_direct = true;
    ChatOutcome outcome =
        client_->chat(make_request(build_direct_weights_prompt(ctx)));
    result.response = outcome.text;
    if (outcome.ok()) {
      try {
        result.direct =
            parse_direct_weights(outcome.text, ctx.stats.means.size());
        result.direct.epoch = ctx.stats.epoch;
        std::string parsed;
        for (size_t i = 0; i < result.direct.weights.size(); ++i)
          parsed += (i ? "," : "") + format_sig(result.direct.weights[i], 6);
        commit_record(tick, epoch, parsed, false);
        return result;
      } catch (const Error&) {
        // fall through to fallback
      }
    }
    // Keep the previous weights; uniform midpoint before the first success.
    result.direct = prev_weights_.value_or(WeightVector{
        std::vector<double>(ctx.stats.means.size(), 0.75), -1,
        ctx.stats.epoch});
    result.direct.rule_id = -1;
    result.llm_failed = true;
    commit_record(tick, epoch, "", true);
    return result;
  }

  SelectorConfig config_;
  ChatClient* client_;
  Rng rng_;
  long invocations_ = 0;
  std::optional<int> prev_rule_;
  std::optional<WeightVector> prev_weights_;
};

}  // namespace ahrs
