#pragma once

// Per-branch return and advantage estimation. GAE runs independently on each
// reward branch of a rollout; branch statistics summarize per-episode
// component returns for the scheduler, and a bounded FIFO keeps their recent
// history.

#include <cmath>
#include <deque>
#include <vector>

#include "ahrs/common.hpp"

namespace ahrs {

// One environment stream of T transitions with B reward branches. Flat
// row-major buffers; `values` carries T+1 rows, the last being the bootstrap
// value of the observation after the final transition.
struct RolloutBatch {
  size_t T = 0;
  size_t B = 0;
  size_t obs_dim = 0;
  size_t act_dim = 0;
  std::vector<double> obs;            // T x obs_dim
  std::vector<double> actions;        // T x act_dim
  std::vector<double> logprobs_old;   // T
  std::vector<double> rewards;        // T x B
  std::vector<double> values;         // (T+1) x B
  std::vector<char> dones;            // T
  std::vector<double> advantages;     // T x B, filled by GAE
  std::vector<double> returns_target; // T x B, filled by GAE
};

struct BranchStats {
  std::vector<double> means;
  std::vector<double> vars;  // population variance
  unsigned long epoch = 0;
};

// FIFO of the most recent BranchStats, oldest first, capped at `capacity`.
class StatsHistory {
 public:
  explicit StatsHistory(size_t capacity = 5) : capacity_(capacity) {}

  void push(const BranchStats& stats) {
    require(entries_.empty() || stats.epoch > entries_.back().epoch,
            Errc::non_monotonic_epoch,
            strprintf("epoch %lu after %lu", stats.epoch,
                      entries_.back().epoch));
    entries_.push_back(stats);
    if (entries_.size() > capacity_) entries_.pop_front();
  }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  size_t capacity() const { return capacity_; }
  const BranchStats& operator[](size_t i) const { return entries_[i]; }
  const BranchStats& newest() const { return entries_.back(); }

 private:
  size_t capacity_;
  std::deque<BranchStats> entries_;
};

// delta_{t,k} = r_{t,k} + gamma*(1-done_t)*V_k(s_{t+1}) - V_k(s_t)
// A_{t,k}     = delta_{t,k} + gamma*lambda*(1-done_t)*A_{t+1,k}
// returns_target_{t,k} = A_{t,k} + V_k(s_t)
inline void compute_gae_per_branch(RolloutBatch& batch, double gamma,
                                   double lambda) {
  const size_t T = batch.T, B = batch.B;
  require(batch.rewards.size() == T * B && batch.values.size() == (T + 1) * B &&
              batch.dones.size() == T,
          Errc::shape_mismatch, "rollout batch layout");
  require(gamma >= 0.0 && gamma <= 1.0 && lambda >= 0.0 && lambda <= 1.0,
          Errc::invalid_value, "gamma and lambda must lie in [0, 1]");
  require(all_finite(batch.rewards) && all_finite(batch.values),
          Errc::non_finite_input, "rewards or values");

  batch.advantages.assign(T * B, 0.0);
  batch.returns_target.assign(T * B, 0.0);
  for (size_t k = 0; k < B; ++k) {
    double running = 0.0;
    for (size_t t = T; t-- > 0;) {
      double not_done = batch.dones[t] ? 0.0 : 1.0;
      double delta = batch.rewards[t * B + k] +
                     gamma * not_done * batch.values[(t + 1) * B + k] -
                     batch.values[t * B + k];
      running = delta + gamma * lambda * not_done * running;
      batch.advantages[t * B + k] = running;
      batch.returns_target[t * B + k] = running + batch.values[t * B + k];
    }
  }
}

// Each branch column independently shifted to mean 0 and scaled to
// population std 1; degenerate columns (std < 1e-8) become all zeros.
inline std::vector<double> normalize_advantages(const std::vector<double>& adv,
                                                size_t T, size_t B) {
  require(adv.size() == T * B, Errc::shape_mismatch, "advantage layout");
  require(T >= 2, Errc::shape_mismatch, "need at least two rows");
  std::vector<double> out(adv.size());
  for (size_t k = 0; k < B; ++k) {
    double mean = 0.0;
    for (size_t t = 0; t < T; ++t) mean += adv[t * B + k];
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (size_t t = 0; t < T; ++t) {
      double d = adv[t * B + k] - mean;
      var += d * d;
    }
    double std_dev = std::sqrt(var / static_cast<double>(T));
    for (size_t t = 0; t < T; ++t)
      out[t * B + k] =
          std_dev < 1e-8 ? 0.0 : (adv[t * B + k] - mean) / std_dev;
  }
  return out;
}

// Column means and population variances of per-episode component returns
// (E rows, B columns, row-major).
inline BranchStats summarize_branches(const std::vector<double>& episode_returns,
                                      size_t E, size_t B,
                                      unsigned long epoch) {
  require(E >= 1, Errc::empty_window, "no completed episodes in window");
  require(episode_returns.size() == E * B, Errc::shape_mismatch,
          "episode return layout");
  BranchStats stats;
  stats.epoch = epoch;
  stats.means.assign(B, 0.0);
  stats.vars.assign(B, 0.0);
  for (size_t e = 0; e < E; ++e)
    for (size_t k = 0; k < B; ++k)
      stats.means[k] += episode_returns[e * B + k];
  for (size_t k = 0; k < B; ++k) stats.means[k] /= static_cast<double>(E);
  for (size_t e = 0; e < E; ++e)
    for (size_t k = 0; k < B; ++k) {
      double d = episode_returns[e * B + k] - stats.means[k];
      stats.vars[k] += d * d;
    }
  for (size_t k = 0; k < B; ++k) stats.vars[k] /= static_cast<double>(E);
  return stats;
}

}  // namespace ahrs
