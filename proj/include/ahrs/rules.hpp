#pragma once

// The frozen repository of eight weight-generation rules and the weight
// computation applied at every scheduler tick. Each rule maps branch return
// statistics (means, variances, history) to a score per branch; scores are
// min-max normalized and offset by the base weight, so every final weight
// lands in [w_base, w_base + w_range] (default [0.5, 1.0]).
//
// Rules that look at history only consider entries strictly older than the
// current stats epoch, so results do not depend on whether the current stats
// were already appended to the queue.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ahrs/common.hpp"
#include "ahrs/estimation.hpp"

namespace ahrs {

struct RuleParams {
  double alpha = 1.0;
  double beta = 0.5;
  double lambda_var = 0.5;
  double epsilon = 1e-8;
  double w_base = 0.5;
  double w_range = 0.5;
};

struct RuleSpec {
  int id = 0;
  std::string name;
  std::string title;        // heading shown in prompts
  std::string description;  // sentence(s) shown to the LLM
};

struct WeightVector {
  std::vector<double> weights;
  int rule_id = 0;  // 0 = none (fixed weights), -1 = direct LLM weights
  unsigned long epoch = 0;
};

inline const std::vector<RuleSpec>& list_rules() {
  static const std::vector<RuleSpec> repo = {
      {1, "mean_only", "Mean Returns Only",
       "Generate weights based on the mean returns of each reward component.\n"
       "Prioritize components with higher mean returns."},
      {2, "variance_only", "Variance Returns Only",
       "Generate weights based on the variance returns of each reward "
       "component.\nPrioritize components with higher variance returns."},
      {3, "mean_plus_variance", "Combined Mean and Variance Returns",
       "Use both mean and variance returns to generate weights:\n"
       "weight = mean_returns + var_returns"},
      {4, "improvement_rate", "Improvement Rate Only",
       "Generate weights from the relative improvement of each component's "
       "mean return over its historical average:\n"
       "score = (mean_returns - historical_mean) / (abs(historical_mean) + "
       "epsilon)\nPrioritize components that are improving fastest."},
      {5, "log_smoothed", "Logarithmic Mean and Adjusted Variance",
       "Use logarithmic means and adjusted variances to smooth out extreme "
       "values:\nscore = log(1 + abs(mean_returns)) * sign(mean_returns) - "
       "lambda_var * log(1 + var_returns)"},
      {6, "mean_var_tradeoff", "Mean-Variance Tradeoff",
       "Balance average return and variance, scaled by alpha and offset by "
       "beta, to prioritize stable, high-performing components:\n"
       "score = alpha * (mean_returns - beta * var_returns)"},
      {7, "inverse_variance", "Inverse-Variance Weighted Mean",
       "Favor components with high mean returns and low variance:\n"
       "score = mean_returns / (1 + var_returns)"},
      {8, "recent_momentum", "Recent Momentum",
       "Generate weights from the change in mean returns since the previous "
       "evaluation:\nscore = mean_returns - previous_mean_returns\n"
       "Prioritize components whose returns accumulate fastest."},
  };
  return repo;
}

namespace detail {

// History entries strictly older than `epoch`, oldest first.
inline std::vector<const BranchStats*> older_entries(
    const StatsHistory& history, unsigned long epoch) {
  std::vector<const BranchStats*> out;
  for (size_t i = 0; i < history.size(); ++i)
    if (history[i].epoch < epoch) out.push_back(&history[i]);
  return out;
}

inline std::vector<double> rule_scores(int rule_id, const BranchStats& stats,
                                       const StatsHistory& history,
                                       const RuleParams& params) {
  const size_t B = stats.means.size();
  const auto& m = stats.means;
  const auto& v = stats.vars;
  std::vector<double> s(B, 0.0);
  switch (rule_id) {
    case 1:
      s = m;
      break;
    case 2:
      s = v;
      break;
    case 3:
      for (size_t k = 0; k < B; ++k) s[k] = m[k] + v[k];
      break;
    case 4: {
      auto older = older_entries(history, stats.epoch);
      if (older.empty()) break;  // no history: uniform
      for (size_t k = 0; k < B; ++k) {
        double hist_mean = 0.0;
        for (const auto* e : older) hist_mean += e->means[k];
        hist_mean /= static_cast<double>(older.size());
        s[k] = (m[k] - hist_mean) / (std::fabs(hist_mean) + params.epsilon);
      }
      break;
    }
    case 5:
      for (size_t k = 0; k < B; ++k) {
        double sign = m[k] > 0 ? 1.0 : (m[k] < 0 ? -1.0 : 0.0);
        s[k] = std::log1p(std::fabs(m[k])) * sign -
               params.lambda_var * std::log1p(v[k]);
      }
      break;
    case 6:
      for (size_t k = 0; k < B; ++k)
        s[k] = params.alpha * (m[k] - params.beta * v[k]);
      break;
    case 7:
      for (size_t k = 0; k < B; ++k) s[k] = m[k] / (1.0 + v[k]);
      break;
    case 8: {
      auto older = older_entries(history, stats.epoch);
      if (older.empty()) break;  // no history: uniform
      const BranchStats* prev = older.back();
      for (size_t k = 0; k < B; ++k) s[k] = m[k] - prev->means[k];
      break;
    }
    default:
      fail(Errc::unknown_rule, strprintf("rule id %d", rule_id));
  }
  return s;
}

}  // namespace detail

inline WeightVector compute_weights(int rule_id, const BranchStats& stats,
                                    const StatsHistory& history,
                                    const RuleParams& params = {}) {
  require(rule_id >= 1 && rule_id <= 8, Errc::unknown_rule,
          strprintf("rule id %d", rule_id));
  require(all_finite(stats.means) && all_finite(stats.vars),
          Errc::non_finite_stats, "branch stats");
  require(stats.means.size() == stats.vars.size() && !stats.means.empty(),
          Errc::shape_mismatch, "branch stats");

  std::vector<double> scores =
      detail::rule_scores(rule_id, stats, history, params);
  double lo = *std::min_element(scores.begin(), scores.end());
  double hi = *std::max_element(scores.begin(), scores.end());

  WeightVector w;
  w.rule_id = rule_id;
  w.epoch = stats.epoch;
  w.weights.resize(scores.size());
  if (hi - lo <= params.epsilon) {
    // Degenerate spread: the continuous limit between "all equal" and
    // "nearly equal" is the midpoint.
    std::fill(w.weights.begin(), w.weights.end(),
              params.w_base + 0.5 * params.w_range);
  } else {
    for (size_t k = 0; k < scores.size(); ++k)
      w.weights[k] =
          params.w_base + params.w_range * (scores[k] - lo) / (hi - lo);
  }
  return w;
}

// Numbered catalog entry per rule, byte-stable; embedded verbatim in the
// selection prompt.
inline std::string rules_prompt_block() {
  std::string out;
  for (const auto& rule : list_rules()) {
    out += strprintf("%d. %s:\n", rule.id, rule.title.c_str());
    out += rule.description;
    out += "\n";
  }
  return out;
}

}  // namespace ahrs
