#pragma once

// The training loop: rollout collection across parallel environment handles,
// per-branch GAE, scheduler ticks that refresh the per-branch priority
// weights, and clipped-surrogate PPO updates on the weighted combined
// advantage. Weights persist unchanged between ticks.

#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ahrs/common.hpp"
#include "ahrs/envs.hpp"
#include "ahrs/estimation.hpp"
#include "ahrs/nets.hpp"
#include "ahrs/reward_dsl.hpp"
#include "ahrs/rules.hpp"
#include "ahrs/scheduler.hpp"

namespace ahrs {

enum class Algo { ppo, ppo_a, hd_ppo, hd_ppo_a, ahrs, ahrs_r, ahrs_d };

inline Algo parse_algo(const std::string& s) {
  if (s == "ppo") return Algo::ppo;
  if (s == "ppo-a") return Algo::ppo_a;
  if (s == "hd-ppo") return Algo::hd_ppo;
  if (s == "hd-ppo-a") return Algo::hd_ppo_a;
  if (s == "ahrs") return Algo::ahrs;
  if (s == "ahrs-r") return Algo::ahrs_r;
  if (s == "ahrs-d") return Algo::ahrs_d;
  fail(Errc::invalid_value, "unknown algo '" + s + "'");
}

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::ppo: return "ppo";
    case Algo::ppo_a: return "ppo-a";
    case Algo::hd_ppo: return "hd-ppo";
    case Algo::hd_ppo_a: return "hd-ppo-a";
    case Algo::ahrs: return "ahrs";
    case Algo::ahrs_r: return "ahrs-r";
    case Algo::ahrs_d: return "ahrs-d";
  }
  return "?";
}

struct TrainConfig {
  std::string env_name = "point-mass-nav";
  std::string algo = "ahrs";
  std::string selector = "scripted";  // llm|replay|scripted|random|fixed
  std::uint64_t seed = 1;
  int total_epochs = 500;
  int steps_per_epoch = 2048;
  int num_envs = 8;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double lr_policy = 3e-4;
  double lr_value = 1e-3;
  int update_epochs = 4;
  int minibatch_size = 256;
  double entropy_coef = 0.0;
  double value_coef = 1.0;
  double w_base = 0.5;
  int schedule_period = 100;
  int history_len = 5;
  int fixed_rule = 8;
  std::vector<int> script = {1, 2, 3, 4, 5, 6, 7, 8};
  std::string transcript_path;
  bool aux_enabled = false;
  std::string aux_expr;
  bool norm_adv = true;
  std::string llm_model = "gpt-4o";
  std::string out_dir;  // checkpoints written here when non-empty
};

// Fixed architecture: two tanh hidden layers of 64.
inline const std::vector<int>& hidden_sizes() {
  static const std::vector<int> h = {64, 64};
  return h;
}

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double total_return_mean = 0.0;
  double total_return_std = 0.0;
  int rule_id = 0;  // 0 = none (fixed uniform weights), -1 = direct weights
  std::vector<double> branch_means;
  std::vector<double> branch_vars;
  std::vector<double> weights;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void write(const EpochMetrics& m) = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  long selector_invocations = 0;
  std::vector<int> tick_epochs;  // 1-based epochs where a tick ran
};

// ---------------------------------------------------------------------------
// Algo helpers
// ---------------------------------------------------------------------------

inline bool algo_uses_aux(Algo a, bool aux_enabled) {
  switch (a) {
    case Algo::ppo:
    case Algo::hd_ppo: return false;
    case Algo::ppo_a:
    case Algo::hd_ppo_a: return true;
    default: return aux_enabled;
  }
}

// Whether the auxiliary reward gets its own branch (ppo-a folds it into the
// scalar sum instead).
inline bool aux_has_branch(Algo a, bool aux_enabled) {
  return algo_uses_aux(a, aux_enabled) && a != Algo::ppo && a != Algo::ppo_a;
}

inline size_t branch_count(Algo a, int K, bool aux_enabled) {
  size_t base = (a == Algo::ppo || a == Algo::ppo_a) ? 1 : static_cast<size_t>(K);
  return base + (aux_has_branch(a, aux_enabled) ? 1 : 0);
}

// Map one step's decomposed env reward (+ aux value) onto training branches.
inline void map_branch_rewards(Algo a, const std::vector<double>& comps,
                               double aux_value, bool aux_enabled,
                               std::vector<double>& out) {
  out.clear();
  if (a == Algo::ppo || a == Algo::ppo_a) {
    double sum = std::accumulate(comps.begin(), comps.end(), 0.0);
    if (a == Algo::ppo_a) sum += aux_value;
    out.push_back(sum);
    return;
  }
  out = comps;
  if (aux_has_branch(a, aux_enabled)) out.push_back(aux_value);
}

// ---------------------------------------------------------------------------
// Advantage combination (weighted sum across branches)
// ---------------------------------------------------------------------------

inline std::vector<double> combine_advantages(const std::vector<double>& adv,
                                              size_t T, size_t B,
                                              const WeightVector& weights) {
  require(adv.size() == T * B, Errc::shape_mismatch, "advantage layout");
  require(weights.weights.size() == B, Errc::shape_mismatch,
          strprintf("weight count %zu vs %zu branches",
                    weights.weights.size(), B));
  std::vector<double> out(T, 0.0);
  for (size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    for (size_t k = 0; k < B; ++k) acc += weights.weights[k] * adv[t * B + k];
    out[t] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPO update
// ---------------------------------------------------------------------------

// Flattened epoch batch, all envs pooled. `advantages` is already
// normalized (or raw when normalization is off).
struct UpdateBatch {
  size_t T = 0;
  size_t B = 0;
  size_t obs_dim = 0;
  size_t act_dim = 0;
  std::vector<double> obs;
  std::vector<double> actions;
  std::vector<double> logprobs_old;
  std::vector<double> advantages;      // T x B
  std::vector<double> returns_target;  // T x B
};

struct LossRecord {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

constexpr double kMaxGradNorm = 0.5;

inline LossRecord ppo_update(PolicyParams& policy, ValueParams& values,
                             const UpdateBatch& batch,
                             const WeightVector& weights,
                             const TrainConfig& cfg, Rng& shuffle_rng,
                             AdamState& policy_opt, AdamState& value_opt) {
  const size_t T = batch.T, B = batch.B;
  require(values.branches.size() == B, Errc::shape_mismatch,
          "value branch count");
  std::vector<double> combined = combine_advantages(batch.advantages, T, B,
                                                    weights);

  std::vector<size_t> order(T);
  std::iota(order.begin(), order.end(), 0);

  PolicyGrad pgrad = zero_grad_like(policy);
  ValueGrad vgrad = zero_grad_like(values);
  auto policy_views = param_views(policy);
  auto value_views = param_views(values);

  LossRecord totals;
  long updates = 0;
  MlpCache cache;
  std::vector<double> obs_row(batch.obs_dim), act_row(batch.act_dim);
  std::vector<double> grad_mu(batch.act_dim);

  for (int pass = 0; pass < cfg.update_epochs; ++pass) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < T; start += cfg.minibatch_size) {
      size_t len = std::min<size_t>(cfg.minibatch_size, T - start);
      double inv_n = 1.0 / static_cast<double>(len);

      auto pgrad_views = param_views(pgrad);
      auto vgrad_views = param_views(vgrad);
      for (auto& v : pgrad_views) std::fill(v.data, v.data + v.size, 0.0);
      for (auto& v : vgrad_views) std::fill(v.data, v.data + v.size, 0.0);

      double p_loss = 0.0, v_loss = 0.0;
      for (size_t j = 0; j < len; ++j) {
        size_t idx = order[start + j];
        std::copy_n(&batch.obs[idx * batch.obs_dim], batch.obs_dim,
                    obs_row.begin());
        std::copy_n(&batch.actions[idx * batch.act_dim], batch.act_dim,
                    act_row.begin());

        std::vector<double> mu = mlp_forward(policy.trunk, obs_row, &cache);
        double logp_new = gaussian_logprob(mu, policy.log_std, act_row);
        double ratio = std::exp(logp_new - batch.logprobs_old[idx]);
        double adv = combined[idx];
        double surr1 = ratio * adv;
        double clipped = std::min(std::max(ratio, 1.0 - cfg.clip_eps),
                                  1.0 + cfg.clip_eps);
        double surr2 = clipped * adv;
        p_loss += -std::min(surr1, surr2);

        // d(-min)/d logp_new: the unclipped branch contributes surr1 (since
        // d ratio/d logp = ratio); the clipped branch is locally constant.
        double dlogp = surr1 <= surr2 ? -surr1 * inv_n : 0.0;
        if (dlogp != 0.0) {
          std::fill(grad_mu.begin(), grad_mu.end(), 0.0);
          gaussian_logprob_backward(mu, policy.log_std, act_row, dlogp,
                                    grad_mu, pgrad.log_std);
          mlp_backward(policy.trunk, cache, grad_mu, pgrad.trunk);
        }

        for (size_t k = 0; k < B; ++k) {
          std::vector<double> v =
              mlp_forward(values.branches[k], obs_row, &cache);
          double resid = v[0] - batch.returns_target[idx * B + k];
          v_loss += resid * resid;
          std::vector<double> upstream = {cfg.value_coef * 2.0 * resid *
                                          inv_n};
          mlp_backward(values.branches[k], cache, upstream,
                       vgrad.branches[k]);
        }
      }

      double entropy = gaussian_entropy(policy.log_std);
      if (cfg.entropy_coef != 0.0)
        for (double& g : pgrad.log_std) g -= cfg.entropy_coef;

      p_loss *= inv_n;
      v_loss *= inv_n;
      require(std::isfinite(p_loss) && std::isfinite(v_loss),
              Errc::non_finite_loss,
              strprintf("policy %g value %g", p_loss, v_loss));

      clip_global_norm(pgrad_views, kMaxGradNorm);
      adam_step(policy_views, pgrad_views, policy_opt, cfg.lr_policy);
      clamp_log_std(policy);

      clip_global_norm(vgrad_views, kMaxGradNorm);
      adam_step(value_views, vgrad_views, value_opt, cfg.lr_value);

      totals.policy_loss += p_loss;
      totals.value_loss += v_loss;
      totals.entropy += entropy;
      ++updates;
    }
  }
  if (updates > 0) {
    totals.policy_loss /= static_cast<double>(updates);
    totals.value_loss /= static_cast<double>(updates);
    totals.entropy /= static_cast<double>(updates);
  }
  return totals;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg, ChatClient* client = nullptr)
      : cfg_(cfg),
        algo_(parse_algo(cfg.algo)),
        sample_rng_(derive_seed(cfg.seed, "sample")),
        shuffle_rng_(derive_seed(cfg.seed, "shuffle")),
        history_(static_cast<size_t>(cfg.history_len)) {
    require(cfg_.total_epochs >= 1 && cfg_.steps_per_epoch >= 1 &&
                cfg_.num_envs >= 1,
            Errc::invalid_value, "epochs, steps, and envs must be positive");
    require(cfg_.steps_per_epoch % cfg_.num_envs == 0, Errc::invalid_value,
            "steps_per_epoch must be a multiple of num_envs");
    require(cfg_.schedule_period >= 1, Errc::invalid_value, "schedule_period");

    for (int e = 0; e < cfg_.num_envs; ++e)
      envs_.push_back(Env::make(cfg_.env_name, derive_seed(cfg_.seed, "env",
                                                           e)));
    const EnvSpec& spec = envs_[0].spec();
    K_ = spec.num_components;
    B_ = branch_count(algo_, K_, cfg_.aux_enabled);
    use_aux_ = algo_uses_aux(algo_, cfg_.aux_enabled);

    if (use_aux_) {
      require(!cfg_.aux_expr.empty(), Errc::invalid_value,
              "auxiliary reward enabled but aux.expr is empty");
      aux_ast_ = dsl::parse_expr(cfg_.aux_expr);
      auto vars = free_vars(*aux_ast_);
      for (const auto& v : vars) {
        bool known = v == "action_norm" || v == "step";
        for (const auto& f : spec.obs_field_names) known = known || v == f;
        require(known, Errc::unbound_variable,
                "aux.expr references unknown variable '" + v + "'");
      }
    }

    Rng policy_rng(derive_seed(cfg_.seed, "policy-init"));
    policy_ = init_policy(spec.obs_dim, spec.act_dim, hidden_sizes(),
                          policy_rng);
    Rng value_rng(derive_seed(cfg_.seed, "value-init"));
    values_ = init_values(spec.obs_dim, static_cast<int>(B_), hidden_sizes(),
                          value_rng);
    policy_opt_ = AdamState::like(param_views(policy_));
    value_opt_ = AdamState::like(param_views(values_));

    selector_ = make_selector(client);

    weights_.weights.assign(B_, 1.0);
    weights_.rule_id = 0;

    episode_seed_.assign(cfg_.num_envs, 0);
    running_comp_.assign(cfg_.num_envs, std::vector<double>(K_, 0.0));
    running_aux_.assign(cfg_.num_envs, 0.0);
    for (int e = 0; e < cfg_.num_envs; ++e)
      current_obs_.push_back(envs_[e].reset(episode_seed_[e]++).values);
  }

  TrainResult run(MetricsSink* sink = nullptr) {
    TrainResult result;
    const size_t steps_per_env =
        static_cast<size_t>(cfg_.steps_per_epoch / cfg_.num_envs);
    for (int epoch_idx = 0; epoch_idx < cfg_.total_epochs; ++epoch_idx) {
      int epoch = epoch_idx + 1;

      std::vector<RolloutBatch> batches = collect(steps_per_env);
      for (auto& b : batches)
        compute_gae_per_branch(b, cfg_.gamma, cfg_.lambda);

      if (epoch_idx % cfg_.schedule_period == 0) {
        tick(epoch);
        result.tick_epochs.push_back(epoch);
      }

      UpdateBatch ub = merge(batches);
      LossRecord losses = ppo_update(policy_, values_, ub, weights_, cfg_,
                                     shuffle_rng_, policy_opt_, value_opt_);

      EpochMetrics m = make_metrics(epoch, losses);
      if (sink) sink->write(m);
      result.metrics.push_back(std::move(m));
      epoch_window_.clear();

      if (!cfg_.out_dir.empty() && epoch % 100 == 0)
        save_checkpoint(
            cfg_.out_dir + strprintf("/checkpoint_epoch_%d.txt", epoch),
            policy_, values_);
    }
    if (!cfg_.out_dir.empty())
      save_checkpoint(cfg_.out_dir + "/checkpoint_final.txt", policy_,
                      values_);
    result.selector_invocations = selector_ ? selector_->invocations() : 0;
    return result;
  }

  const PolicyParams& policy() const { return policy_; }
  const ValueParams& values() const { return values_; }
  const WeightVector& current_weights() const { return weights_; }

 private:
  struct Episode {
    std::vector<double> branch_sums;
    double total = 0.0;  // sum of the K environment components only
  };

  std::unique_ptr<Selector> make_selector(ChatClient* client) {
    SelectorConfig sc;
    sc.seed = derive_seed(cfg_.seed, "selector");
    sc.fixed_rule = cfg_.fixed_rule;
    sc.script = cfg_.script;
    sc.model = cfg_.llm_model;
    switch (algo_) {
      case Algo::ppo:
      case Algo::ppo_a:
        return nullptr;  // uniform weights, no rule selection
      case Algo::hd_ppo:
      case Algo::hd_ppo_a:
        sc.variant = SelectorVariant::fixed;
        break;
      case Algo::ahrs_r:
        sc.variant = SelectorVariant::random;
        break;
      case Algo::ahrs_d:
        require(cfg_.selector == "llm" || cfg_.selector == "replay",
                Errc::invalid_value, "ahrs-d needs the llm or replay selector");
        sc.variant = SelectorVariant::direct_llm;
        break;
      case Algo::ahrs:
        if (cfg_.selector == "llm" || cfg_.selector == "replay")
          sc.variant = SelectorVariant::llm;
        else if (cfg_.selector == "scripted")
          sc.variant = SelectorVariant::scripted;
        else if (cfg_.selector == "random")
          sc.variant = SelectorVariant::random;
        else if (cfg_.selector == "fixed")
          sc.variant = SelectorVariant::fixed;
        else
          fail(Errc::invalid_value, "unknown selector '" + cfg_.selector + "'");
        break;
    }
    return std::make_unique<Selector>(sc, client);
  }

  std::vector<RolloutBatch> collect(size_t steps_per_env) {
    const EnvSpec& spec = envs_[0].spec();
    std::vector<RolloutBatch> batches(envs_.size());
    for (auto& b : batches) {
      b.T = steps_per_env;
      b.B = B_;
      b.obs_dim = static_cast<size_t>(spec.obs_dim);
      b.act_dim = static_cast<size_t>(spec.act_dim);
      b.obs.reserve(steps_per_env * b.obs_dim);
      b.actions.reserve(steps_per_env * b.act_dim);
      b.rewards.reserve(steps_per_env * B_);
      b.values.reserve((steps_per_env + 1) * B_);
    }

    std::vector<double> action(spec.act_dim), branch_row;
    for (size_t t = 0; t < steps_per_env; ++t) {
      for (size_t e = 0; e < envs_.size(); ++e) {
        RolloutBatch& b = batches[e];
        const std::vector<double>& obs = current_obs_[e];

        std::vector<double> mu = mlp_forward(policy_.trunk, obs);
        for (int i = 0; i < spec.act_dim; ++i)
          action[i] =
              mu[i] + std::exp(policy_.log_std[i]) * sample_rng_.normal();
        double logp = gaussian_logprob(mu, policy_.log_std, action);

        std::vector<double> v = value_forward(values_, obs);

        StepResult res = envs_[e].step(ActionVec{action});

        double aux_value = 0.0;
        if (use_aux_)
          aux_value = eval_aux(res.obs, action, envs_[e].step_count());
        map_branch_rewards(algo_, res.reward.components, aux_value,
                           cfg_.aux_enabled, branch_row);

        b.obs.insert(b.obs.end(), obs.begin(), obs.end());
        b.actions.insert(b.actions.end(), action.begin(), action.end());
        b.logprobs_old.push_back(logp);
        b.values.insert(b.values.end(), v.begin(), v.end());
        b.rewards.insert(b.rewards.end(), branch_row.begin(),
                         branch_row.end());
        b.dones.push_back(res.done ? 1 : 0);

        for (int k = 0; k < K_; ++k)
          running_comp_[e][k] += res.reward.components[k];
        running_aux_[e] += aux_value;

        if (res.done) {
          finish_episode(e);
          current_obs_[e] = envs_[e].reset(episode_seed_[e]++).values;
        } else {
          current_obs_[e] = res.obs.values;
        }
      }
    }
    for (size_t e = 0; e < envs_.size(); ++e) {
      std::vector<double> v = value_forward(values_, current_obs_[e]);
      batches[e].values.insert(batches[e].values.end(), v.begin(), v.end());
    }
    return batches;
  }

  double eval_aux(const Observation& obs, const std::vector<double>& action,
                  int step_index) {
    const EnvSpec& spec = envs_[0].spec();
    dsl::Bindings b;
    for (size_t i = 0; i < spec.obs_field_names.size(); ++i)
      b[spec.obs_field_names[i]] = obs.values[i];
    double norm_sq = 0.0;
    for (double a : action) {
      double c = std::min(std::max(a, spec.action_low), spec.action_high);
      norm_sq += c * c;
    }
    b["action_norm"] = std::sqrt(norm_sq);
    b["step"] = static_cast<double>(step_index);
    return dsl::eval_expr(*aux_ast_, b);
  }

  void finish_episode(size_t e) {
    Episode ep;
    map_branch_rewards(algo_, running_comp_[e], running_aux_[e],
                       cfg_.aux_enabled, ep.branch_sums);
    ep.total = std::accumulate(running_comp_[e].begin(),
                               running_comp_[e].end(), 0.0);
    epoch_window_.push_back(ep);
    tick_window_.push_back(std::move(ep));
    std::fill(running_comp_[e].begin(), running_comp_[e].end(), 0.0);
    running_aux_[e] = 0.0;
  }

  // Episodes in flight count as a window of partial sums when nothing has
  // completed yet (short epochs relative to the horizon).
  std::vector<Episode> partial_window() const {
    std::vector<Episode> out;
    for (size_t e = 0; e < envs_.size(); ++e) {
      Episode ep;
      map_branch_rewards(algo_, running_comp_[e], running_aux_[e],
                         cfg_.aux_enabled, ep.branch_sums);
      ep.total = std::accumulate(running_comp_[e].begin(),
                                 running_comp_[e].end(), 0.0);
      out.push_back(std::move(ep));
    }
    return out;
  }

  static BranchStats stats_over(const std::vector<Episode>& window, size_t B,
                                unsigned long epoch) {
    std::vector<double> rows;
    rows.reserve(window.size() * B);
    for (const auto& ep : window)
      rows.insert(rows.end(), ep.branch_sums.begin(), ep.branch_sums.end());
    return summarize_branches(rows, window.size(), B, epoch);
  }

  void tick(int epoch) {
    std::vector<Episode> fallback;
    if (tick_window_.empty()) fallback = partial_window();
    const std::vector<Episode>& window =
        tick_window_.empty() ? fallback : tick_window_;
    BranchStats stats = stats_over(window, B_, static_cast<unsigned long>(epoch));

    if (!selector_) {  // ppo family: constant uniform weights
      weights_.weights.assign(B_, 1.0);
      weights_.rule_id = 0;
      weights_.epoch = static_cast<unsigned long>(epoch);
      tick_window_.clear();
      return;
    }

    SelectionContext ctx;
    ctx.task_desc = envs_[0].task_description();
    ctx.env_desc = envs_[0].env_description();
    ctx.reward_desc = reward_desc_with_aux();
    ctx.rules_block = rules_prompt_block();
    ctx.stats = stats;
    ctx.history = history_;
    ctx.prev_rule = selector_->prev_rule();
    ctx.prev_weights = selector_->prev_weights();

    SelectionResult sel = selector_->select(ctx, epoch);
    history_.push(stats);
    if (sel.is_direct) {
      weights_ = sel.direct;
    } else {
      RuleParams params;
      params.w_base = cfg_.w_base;
      weights_ = compute_weights(sel.rule_id, stats, history_, params);
    }
    selector_->note_applied_weights(weights_);
    tick_window_.clear();
  }

  std::string reward_desc_with_aux() const {
    std::string desc = envs_[0].reward_description();
    if (aux_has_branch(algo_, cfg_.aux_enabled))
      desc += strprintf(
          "\n%d. aux reward: auxiliary shaping reward defined before "
          "training as the expression %s.",
          K_ + 1, cfg_.aux_expr.c_str());
    return desc;
  }

  UpdateBatch merge(const std::vector<RolloutBatch>& batches) {
    UpdateBatch ub;
    ub.B = B_;
    ub.obs_dim = batches[0].obs_dim;
    ub.act_dim = batches[0].act_dim;
    for (const auto& b : batches) {
      ub.T += b.T;
      ub.obs.insert(ub.obs.end(), b.obs.begin(), b.obs.end());
      ub.actions.insert(ub.actions.end(), b.actions.begin(), b.actions.end());
      ub.logprobs_old.insert(ub.logprobs_old.end(), b.logprobs_old.begin(),
                             b.logprobs_old.end());
      ub.advantages.insert(ub.advantages.end(), b.advantages.begin(),
                           b.advantages.end());
      ub.returns_target.insert(ub.returns_target.end(),
                               b.returns_target.begin(),
                               b.returns_target.end());
    }
    if (cfg_.norm_adv)
      ub.advantages = normalize_advantages(ub.advantages, ub.T, ub.B);
    return ub;
  }

  EpochMetrics make_metrics(int epoch, const LossRecord& losses) {
    EpochMetrics m;
    m.epoch = epoch;
    m.rule_id = weights_.rule_id;
    m.weights = weights_.weights;
    m.policy_loss = losses.policy_loss;
    m.value_loss = losses.value_loss;
    m.entropy = losses.entropy;

    const std::vector<Episode>* window = &epoch_window_;
    std::vector<Episode> fallback;
    if (window->empty()) {
      if (last_window_metrics_) {
        m.total_return_mean = last_window_metrics_->total_return_mean;
        m.total_return_std = last_window_metrics_->total_return_std;
        m.branch_means = last_window_metrics_->branch_means;
        m.branch_vars = last_window_metrics_->branch_vars;
        last_window_metrics_ = m;
        return m;
      }
      fallback = partial_window();
      window = &fallback;
    }
    double mean = 0.0;
    for (const auto& ep : *window) mean += ep.total;
    mean /= static_cast<double>(window->size());
    double var = 0.0;
    for (const auto& ep : *window) {
      double d = ep.total - mean;
      var += d * d;
    }
    m.total_return_mean = mean;
    m.total_return_std = std::sqrt(var / static_cast<double>(window->size()));
    BranchStats bs = stats_over(*window, B_, static_cast<unsigned long>(epoch));
    m.branch_means = bs.means;
    m.branch_vars = bs.vars;
    last_window_metrics_ = m;
    return m;
  }

  TrainConfig cfg_;
  Algo algo_;
  Rng sample_rng_;
  Rng shuffle_rng_;
  StatsHistory history_;
  std::vector<Env> envs_;
  int K_ = 0;
  size_t B_ = 0;
  bool use_aux_ = false;
  dsl::ExprPtr aux_ast_;
  PolicyParams policy_;
  ValueParams values_;
  AdamState policy_opt_;
  AdamState value_opt_;
  std::unique_ptr<Selector> selector_;
  WeightVector weights_;
  std::vector<std::uint64_t> episode_seed_;
  std::vector<std::vector<double>> running_comp_;
  std::vector<double> running_aux_;
  std::vector<std::vector<double>> current_obs_;
  std::vector<Episode> epoch_window_;
  std::vector<Episode> tick_window_;
  std::vector<Episode> partial_fallback_;
  std::optional<EpochMetrics> last_window_metrics_;
};

inline TrainResult train(const TrainConfig& cfg, MetricsSink* sink = nullptr,
                         ChatClient* client = nullptr) {
  Trainer trainer(cfg, client);
  return trainer.run(sink);
}

}  // namespace ahrs
