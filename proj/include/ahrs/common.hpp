#pragma once

// Shared error type, deterministic RNG, and small numeric/formatting helpers
// used across the ahrs headers.

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ahrs {

enum class Errc {
  unknown_env,
  dimension_mismatch,
  stepped_after_done,
  cache_mismatch,
  shape_mismatch,
  non_finite_input,
  empty_window,
  non_monotonic_epoch,
  unknown_rule,
  non_finite_stats,
  no_match,
  out_of_range,
  count_mismatch,
  non_finite_value,
  replay_exhausted,
  missing_llm_handle,
  replay_prompt_drift,
  io_error,
  syntax_error,
  unknown_function,
  arity_mismatch,
  unbound_variable,
  non_finite_result,
  parse_error,
  unknown_key,
  invalid_value,
  no_runs,
  non_finite_loss,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::unknown_env: return "UnknownEnv";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::stepped_after_done: return "SteppedAfterDone";
    case Errc::cache_mismatch: return "CacheMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::empty_window: return "EmptyWindow";
    case Errc::non_monotonic_epoch: return "NonMonotonicEpoch";
    case Errc::unknown_rule: return "UnknownRule";
    case Errc::non_finite_stats: return "NonFiniteStats";
    case Errc::no_match: return "NoMatch";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::count_mismatch: return "CountMismatch";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::replay_exhausted: return "ReplayExhausted";
    case Errc::missing_llm_handle: return "MissingLlmHandle";
    case Errc::replay_prompt_drift: return "ReplayPromptDrift";
    case Errc::io_error: return "IoError";
    case Errc::syntax_error: return "SyntaxError";
    case Errc::unknown_function: return "UnknownFunction";
    case Errc::arity_mismatch: return "ArityMismatch";
    case Errc::unbound_variable: return "UnboundVariable";
    case Errc::non_finite_result: return "NonFiniteResult";
    case Errc::parse_error: return "ParseError";
    case Errc::unknown_key: return "UnknownKey";
    case Errc::invalid_value: return "InvalidValue";
    case Errc::no_runs: return "NoRuns";
    case Errc::non_finite_loss: return "NonFiniteLoss";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// printf-style formatting into a std::string.
inline std::string strprintf(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  va_list ap2;
  va_copy(ap2, ap);
  int n = std::vsnprintf(nullptr, 0, fmt, ap);
  va_end(ap);
  std::string out(static_cast<size_t>(n), '\0');
  std::vsnprintf(out.data(), out.size() + 1, fmt, ap2);
  va_end(ap2);
  return out;
}

// Deterministic float rendering. %g with a fixed number of significant
// digits; used at 6 digits in prompts, 9 in metrics CSVs, 17 in checkpoints
// (17 round-trips a double exactly).
inline std::string format_sig(double x, int digits) {
  return strprintf("%.*g", digits, x);
}

// ---------------------------------------------------------------------------
// Seeding and random streams.
//
// Every random decision in a run is drawn from a named stream derived from
// the master seed, so runs are reproducible no matter which subsystems get
// exercised. Distributions are hand-rolled on top of std::mt19937_64 (the
// engine is fully specified by the standard; the stdlib distributions are
// not), keeping streams stable across compilers.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a named sub-stream of `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label bytes
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h) + index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; second draw cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t bound = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t x = next_u64();
      if (x >= bound) return x % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace ahrs
