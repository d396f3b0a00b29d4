#pragma once

// Minimal feed-forward networks with exact reverse-mode gradients, written
// directly against flat double buffers. Sized for desk-scale training: a
// Gaussian policy head (MLP mean + state-independent log-std) and a bank of
// fully independent per-branch value networks. 64-bit floats throughout so
// finite-difference checks have headroom.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ahrs/common.hpp"

namespace ahrs {

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
};

// Affine layers with tanh between them and an identity output.
struct MlpParams {
  std::vector<DenseLayer> layers;
};

struct MlpCache {
  std::vector<std::vector<double>> inputs;  // inputs[i] feeds layers[i]
  std::vector<std::vector<double>> preacts;
};

struct MlpGrad {
  std::vector<DenseLayer> layers;  // same shapes, used as accumulators
};

struct PolicyParams {
  MlpParams trunk;              // obs -> action mean
  std::vector<double> log_std;  // per action dim, clamped to [-10, 2]
};

struct PolicyGrad {
  MlpGrad trunk;
  std::vector<double> log_std;
};

struct ValueParams {
  std::vector<MlpParams> branches;  // each obs -> 1, no shared trunk
};

struct ValueGrad {
  std::vector<MlpGrad> branches;
};

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
inline MlpParams init_mlp(const std::vector<int>& dims, Rng& rng) {
  MlpParams p;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer layer;
    layer.in = dims[i];
    layer.out = dims[i + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.weights.resize(static_cast<size_t>(layer.in) * layer.out);
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    layer.bias.assign(layer.out, 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

inline MlpGrad zero_grad_like(const MlpParams& p) {
  MlpGrad g;
  for (const auto& layer : p.layers) {
    DenseLayer zl;
    zl.in = layer.in;
    zl.out = layer.out;
    zl.weights.assign(layer.weights.size(), 0.0);
    zl.bias.assign(layer.bias.size(), 0.0);
    g.layers.push_back(std::move(zl));
  }
  return g;
}

inline PolicyParams init_policy(int obs_dim, int act_dim,
                                const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> dims;
  dims.push_back(obs_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(act_dim);
  PolicyParams p;
  p.trunk = init_mlp(dims, rng);
  p.log_std.assign(act_dim, 0.0);
  return p;
}

inline ValueParams init_values(int obs_dim, int branches,
                               const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> dims;
  dims.push_back(obs_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(1);
  ValueParams v;
  for (int k = 0; k < branches; ++k) v.branches.push_back(init_mlp(dims, rng));
  return v;
}

inline PolicyGrad zero_grad_like(const PolicyParams& p) {
  return PolicyGrad{zero_grad_like(p.trunk),
                    std::vector<double>(p.log_std.size(), 0.0)};
}

inline ValueGrad zero_grad_like(const ValueParams& v) {
  ValueGrad g;
  for (const auto& b : v.branches) g.branches.push_back(zero_grad_like(b));
  return g;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

inline std::vector<double> mlp_forward(const MlpParams& p,
                                       const std::vector<double>& input,
                                       MlpCache* cache = nullptr) {
  require(!p.layers.empty() &&
              static_cast<int>(input.size()) == p.layers.front().in,
          Errc::dimension_mismatch,
          strprintf("mlp input has %zu entries, expected %d", input.size(),
                    p.layers.empty() ? 0 : p.layers.front().in));
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  std::vector<double> x = input;
  for (size_t li = 0; li < p.layers.size(); ++li) {
    const DenseLayer& layer = p.layers[li];
    if (cache) cache->inputs.push_back(x);
    std::vector<double> z(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.bias[o];
      const double* wrow = &layer.weights[static_cast<size_t>(o) * layer.in];
      for (int i = 0; i < layer.in; ++i) acc += wrow[i] * x[i];
      z[o] = acc;
    }
    if (cache) cache->preacts.push_back(z);
    if (li + 1 < p.layers.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    x = std::move(z);
  }
  return x;
}

// Gradients of (upstream . output) w.r.t. parameters and the input.
// Accumulates into `grad`; returns the input gradient.
inline std::vector<double> mlp_backward(const MlpParams& p,
                                        const MlpCache& cache,
                                        const std::vector<double>& upstream,
                                        MlpGrad& grad) {
  require(cache.inputs.size() == p.layers.size() &&
              cache.preacts.size() == p.layers.size(),
          Errc::cache_mismatch, "cache layer count");
  require(grad.layers.size() == p.layers.size(), Errc::shape_mismatch,
          "grad layer count");
  require(static_cast<int>(upstream.size()) == p.layers.back().out,
          Errc::dimension_mismatch, "upstream size");

  std::vector<double> delta = upstream;  // d loss / d preact of current layer
  for (size_t li = p.layers.size(); li-- > 0;) {
    const DenseLayer& layer = p.layers[li];
    const std::vector<double>& x = cache.inputs[li];
    require(static_cast<int>(x.size()) == layer.in, Errc::cache_mismatch,
            "cached input size");
    DenseLayer& g = grad.layers[li];
    for (int o = 0; o < layer.out; ++o) {
      g.bias[o] += delta[o];
      double* grow = &g.weights[static_cast<size_t>(o) * layer.in];
      for (int i = 0; i < layer.in; ++i) grow[i] += delta[o] * x[i];
    }
    std::vector<double> prev(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double* wrow = &layer.weights[static_cast<size_t>(o) * layer.in];
      for (int i = 0; i < layer.in; ++i) prev[i] += wrow[i] * delta[o];
    }
    if (li > 0) {
      // Input to this layer was tanh of the previous preactivation.
      const std::vector<double>& z = cache.preacts[li - 1];
      for (int i = 0; i < layer.in; ++i) {
        double a = std::tanh(z[i]);
        prev[i] *= 1.0 - a * a;
      }
    }
    delta = std::move(prev);
  }
  return delta;
}

inline std::vector<double> value_forward(const ValueParams& v,
                                         const std::vector<double>& obs) {
  std::vector<double> out(v.branches.size());
  for (size_t k = 0; k < v.branches.size(); ++k)
    out[k] = mlp_forward(v.branches[k], obs)[0];
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal Gaussian
// ---------------------------------------------------------------------------

inline double gaussian_logprob(const std::vector<double>& mu,
                               const std::vector<double>& log_std,
                               const std::vector<double>& action) {
  require(mu.size() == log_std.size() && mu.size() == action.size() &&
              !mu.empty(),
          Errc::dimension_mismatch, "gaussian_logprob");
  double logp = -0.5 * static_cast<double>(mu.size()) * std::log(2.0 * M_PI);
  for (size_t i = 0; i < mu.size(); ++i) {
    double z = (action[i] - mu[i]) * std::exp(-log_std[i]);
    logp -= 0.5 * z * z + log_std[i];
  }
  return logp;
}

// d logp / d mu_i and d logp / d log_std_i, accumulated scaled by `coeff`.
inline void gaussian_logprob_backward(const std::vector<double>& mu,
                                      const std::vector<double>& log_std,
                                      const std::vector<double>& action,
                                      double coeff,
                                      std::vector<double>& grad_mu,
                                      std::vector<double>& grad_log_std) {
  for (size_t i = 0; i < mu.size(); ++i) {
    double inv_sigma = std::exp(-log_std[i]);
    double z = (action[i] - mu[i]) * inv_sigma;
    grad_mu[i] += coeff * z * inv_sigma;
    grad_log_std[i] += coeff * (z * z - 1.0);
  }
}

// Entropy of the diagonal Gaussian; d H / d log_std_i = 1.
inline double gaussian_entropy(const std::vector<double>& log_std) {
  double h = 0.5 * static_cast<double>(log_std.size()) *
             std::log(2.0 * M_PI * M_E);
  for (double ls : log_std) h += ls;
  return h;
}

inline void clamp_log_std(PolicyParams& p) {
  for (double& ls : p.log_std)
    ls = std::min(std::max(ls, kLogStdMin), kLogStdMax);
}

// ---------------------------------------------------------------------------
// Parameter views: flat (pointer, size) spans in a fixed traversal order so
// the optimizer, norm clipping, and checkpointing all agree on layout.
// ---------------------------------------------------------------------------

struct ParamView {
  double* data = nullptr;
  size_t size = 0;
};

inline void append_views(MlpParams& p, std::vector<ParamView>& out) {
  for (auto& layer : p.layers) {
    out.push_back({layer.weights.data(), layer.weights.size()});
    out.push_back({layer.bias.data(), layer.bias.size()});
  }
}
inline void append_views(MlpGrad& g, std::vector<ParamView>& out) {
  for (auto& layer : g.layers) {
    out.push_back({layer.weights.data(), layer.weights.size()});
    out.push_back({layer.bias.data(), layer.bias.size()});
  }
}

inline std::vector<ParamView> param_views(PolicyParams& p) {
  std::vector<ParamView> out;
  append_views(p.trunk, out);
  out.push_back({p.log_std.data(), p.log_std.size()});
  return out;
}
inline std::vector<ParamView> param_views(PolicyGrad& g) {
  std::vector<ParamView> out;
  append_views(g.trunk, out);
  out.push_back({g.log_std.data(), g.log_std.size()});
  return out;
}
inline std::vector<ParamView> param_views(ValueParams& v) {
  std::vector<ParamView> out;
  for (auto& b : v.branches) append_views(b, out);
  return out;
}
inline std::vector<ParamView> param_views(ValueGrad& g) {
  std::vector<ParamView> out;
  for (auto& b : g.branches) append_views(b, out);
  return out;
}

inline double global_norm(const std::vector<ParamView>& views) {
  double sq = 0.0;
  for (const auto& v : views)
    for (size_t i = 0; i < v.size; ++i) sq += v.data[i] * v.data[i];
  return std::sqrt(sq);
}

inline void scale_all(const std::vector<ParamView>& views, double factor) {
  for (const auto& v : views)
    for (size_t i = 0; i < v.size; ++i) v.data[i] *= factor;
}

// Rescale so the global L2 norm does not exceed max_norm.
inline void clip_global_norm(const std::vector<ParamView>& views,
                             double max_norm) {
  double norm = global_norm(views);
  if (norm > max_norm && norm > 0.0) scale_all(views, max_norm / norm);
}

// ---------------------------------------------------------------------------
// Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected)
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;

  static AdamState like(const std::vector<ParamView>& views) {
    AdamState s;
    for (const auto& view : views) {
      s.m.emplace_back(view.size, 0.0);
      s.v.emplace_back(view.size, 0.0);
    }
    return s;
  }
};

inline void adam_step(const std::vector<ParamView>& params,
                      const std::vector<ParamView>& grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          Errc::shape_mismatch, "adam group count");
  ++state.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t a = 0; a < params.size(); ++a) {
    require(params[a].size == grads[a].size &&
                params[a].size == state.m[a].size(),
            Errc::shape_mismatch, "adam array size");
    double* p = params[a].data;
    const double* g = grads[a].data;
    double* m = state.m[a].data();
    double* v = state.v[a].data();
    for (size_t i = 0; i < params[a].size; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned plain text, one named array per block.
//   line 1: "ahrs-checkpoint v1"
//   per array: "array <name> <count>" then <count> values at 17 significant
//   digits, whitespace-separated. Doubles round-trip exactly at 17 digits.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_array(std::ofstream& f, const std::string& name,
                        const std::vector<double>& data) {
  f << "array " << name << " " << data.size() << "\n";
  for (size_t i = 0; i < data.size(); ++i)
    f << format_sig(data[i], 17) << ((i + 1) % 8 == 0 ? "\n" : " ");
  if (data.size() % 8 != 0) f << "\n";
}

inline void write_mlp(std::ofstream& f, const std::string& prefix,
                      const MlpParams& p) {
  for (size_t li = 0; li < p.layers.size(); ++li) {
    write_array(f, strprintf("%s.%zu.W", prefix.c_str(), li),
                p.layers[li].weights);
    write_array(f, strprintf("%s.%zu.b", prefix.c_str(), li),
                p.layers[li].bias);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const PolicyParams& policy,
                            const ValueParams& values) {
  std::ofstream f(path);
  require(f.good(), Errc::io_error, "cannot open " + path);
  f << "ahrs-checkpoint v1\n";
  detail::write_mlp(f, "policy.trunk", policy.trunk);
  detail::write_array(f, "policy.log_std", policy.log_std);
  for (size_t k = 0; k < values.branches.size(); ++k)
    detail::write_mlp(f, strprintf("value.%zu", k), values.branches[k]);
  require(f.good(), Errc::io_error, "write failed for " + path);
}

// Loads into existing parameter objects; shapes must already match.
inline void load_checkpoint(const std::string& path, PolicyParams& policy,
                            ValueParams& values) {
  std::ifstream f(path);
  require(f.good(), Errc::io_error, "cannot open " + path);
  std::string header, version;
  f >> header >> version;
  require(header == "ahrs-checkpoint" && version == "v1", Errc::io_error,
          "bad checkpoint header in " + path);

  std::map<std::string, std::vector<double>> arrays;
  std::string tag;
  while (f >> tag) {
    require(tag == "array", Errc::io_error, "expected 'array', got " + tag);
    std::string name;
    size_t count = 0;
    f >> name >> count;
    std::vector<double> data(count);
    for (size_t i = 0; i < count; ++i) f >> data[i];
    require(f.good() || f.eof(), Errc::io_error, "truncated array " + name);
    arrays.emplace(std::move(name), std::move(data));
  }

  auto take = [&](const std::string& name, std::vector<double>& dst) {
    auto it = arrays.find(name);
    require(it != arrays.end(), Errc::io_error, "missing array " + name);
    require(it->second.size() == dst.size(), Errc::shape_mismatch, name);
    dst = it->second;
  };
  for (size_t li = 0; li < policy.trunk.layers.size(); ++li) {
    take(strprintf("policy.trunk.%zu.W", li), policy.trunk.layers[li].weights);
    take(strprintf("policy.trunk.%zu.b", li), policy.trunk.layers[li].bias);
  }
  take("policy.log_std", policy.log_std);
  for (size_t k = 0; k < values.branches.size(); ++k) {
    for (size_t li = 0; li < values.branches[k].layers.size(); ++li) {
      take(strprintf("value.%zu.%zu.W", k, li),
           values.branches[k].layers[li].weights);
      take(strprintf("value.%zu.%zu.b", k, li),
           values.branches[k].layers[li].bias);
    }
  }
}

}  // namespace ahrs
