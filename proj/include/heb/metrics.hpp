#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heb {

/// Relative balances b_i in (0, 1] summing to one.
struct BalanceDistribution {
  std::vector<double> shares;

  void validate() const {
    if (shares.empty()) throw std::invalid_argument("shares: empty distribution");
    double sum = 0;
    for (double s : shares) {
      if (!(s > 0) || s > 1) throw std::invalid_argument("shares: each share must lie in (0, 1]");
      sum += s;
    }
    if (std::abs(sum - 1) > 1e-12) throw std::invalid_argument("shares: sum is " + std::to_string(sum) + ", not 1");
  }

  static BalanceDistribution uniform(std::size_t n) { return {std::vector<double>(n, 1.0 / static_cast<double>(n))}; }
};

/// Running sum with Neumaier compensation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      c_ += (sum_ - t) + x;
    } else {
      c_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0;
  double c_ = 0;
};

/// Factored-block quota floor(l * b) of a prescribed miner; tolerant of 0.3 * 1000 = 300.00000000000006.
inline std::uint64_t prescribed_quota(double share, std::uint64_t epoch_len) {
  return static_cast<std::uint64_t>(std::floor(share * static_cast<double>(epoch_len) + 1e-9));
}

inline double binomial_log_pmf(std::uint64_t n, std::uint64_t trials, double p) {
  if (n > trials) return -INFINITY;
  if (p <= 0) return n == 0 ? 0.0 : -INFINITY;
  if (p >= 1) return n == trials ? 0.0 : -INFINITY;
  const double nn = static_cast<double>(n);
  const double tt = static_cast<double>(trials);
  return std::lgamma(tt + 1) - std::lgamma(nn + 1) - std::lgamma(tt - nn + 1) + nn * std::log(p) +
         (tt - nn) * std::log1p(-p);
}

inline double binomial_pmf(std::uint64_t n, std::uint64_t trials, double p) {
  return std::exp(binomial_log_pmf(n, trials, p));
}

/// P(lo <= n <= hi) for n ~ Bin(trials, p).
inline double binomial_range(std::uint64_t lo, std::uint64_t hi, std::uint64_t trials, double p) {
  CompensatedSum s;
  hi = std::min(hi, trials);
  for (std::uint64_t n = lo; n <= hi; ++n) s.add(binomial_pmf(n, trials, p));
  return std::clamp(s.value(), 0.0, 1.0);
}

/// Weight of a prescribed miner with `n` blocks: the first `quota` are factored.
inline double conditional_weight(std::uint64_t n, std::uint64_t quota, std::uint64_t epoch_len, double factor) {
  if (n > epoch_len) throw std::out_of_range("conditional_weight: n = " + std::to_string(n) + " exceeds l");
  if (n <= quota) return static_cast<double>(n) * factor;
  return static_cast<double>(quota) * factor + static_cast<double>(n - quota);
}

inline double conditional_weight(std::uint64_t n, double share, std::uint64_t epoch_len, double factor) {
  return conditional_weight(n, prescribed_quota(share, epoch_len), epoch_len, factor);
}

/// E[w_i] of a prescribed miner with share b when all miners are prescribed (n ~ Bin(l, b)).
inline double expected_weight(double share, std::uint64_t epoch_len, double factor) {
  const std::uint64_t quota = prescribed_quota(share, epoch_len);
  CompensatedSum s;
  for (std::uint64_t n = 0; n <= epoch_len; ++n) {
    const double lp = binomial_log_pmf(n, epoch_len, share);
    if (lp < -745) continue;
    s.add(std::exp(lp) * conditional_weight(n, quota, epoch_len, factor));
  }
  return s.value();
}

/// max_i | b_i - E[w_i] / sum_j E[w_j] |.
inline double epsilon(const BalanceDistribution& dist, std::uint64_t epoch_len, double factor) {
  dist.validate();
  std::vector<double> w;
  for (double b : dist.shares) w.push_back(expected_weight(b, epoch_len, factor));
  CompensatedSum total;
  for (double x : w) total.add(x);
  double eps = 0;
  for (std::size_t i = 0; i < w.size(); ++i) eps = std::max(eps, std::abs(dist.shares[i] - w[i] / total.value()));
  return eps;
}

/// E[w] / b, the weight a miner earns per unit of relative balance.
inline double normalized_weight(double share, std::uint64_t epoch_len, double factor) {
  return expected_weight(share, epoch_len, factor) / share;
}

struct CurvePoint {
  double x = 0;  // l or phi, depending on the sweep
  double share = 0;
  double value = 0;  // normalized weight / (l * phi)
};

/// Normalized weight over a grid of epoch lengths at fixed phi.
inline std::vector<CurvePoint> weight_curve_by_length(std::span<const double> shares,
                                                      std::span<const std::uint64_t> lengths, double factor) {
  std::vector<CurvePoint> out;
  for (double b : shares) {
    for (std::uint64_t l : lengths) {
      out.push_back({static_cast<double>(l), b, normalized_weight(b, l, factor) / (static_cast<double>(l) * factor)});
    }
  }
  return out;
}

/// Normalized weight over a grid of factors at fixed l.
inline std::vector<CurvePoint> weight_curve_by_factor(std::span<const double> shares, std::span<const double> factors,
                                                      std::uint64_t epoch_len) {
  std::vector<CurvePoint> out;
  for (double b : shares) {
    for (double phi : factors) {
      out.push_back({phi, b, normalized_weight(b, epoch_len, phi) / (static_cast<double>(epoch_len) * phi)});
    }
  }
  return out;
}

inline void check_rho(double rho) {
  if (!(rho >= 0) || !(rho < 1)) throw std::invalid_argument("rho must lie in [0, 1)");
}

/// Smallest relative balance above which the withholding PoW-only strategy out-mines everyone else.
inline double pow_only_bound(double rho) {
  check_rho(rho);
  return (1 - rho) / (2 - rho);
}

/// Per-step creation probability of a PoW-only miner facing prescribed HEB miners.
inline double pow_only_alpha(double share, double rho) {
  check_rho(rho);
  return share / (share + (1 - rho) * (1 - share));
}

/// P(attacker finishes l private blocks before the public chain reaches l), creation prob. alpha.
inline double takeover_probability(std::uint64_t epoch_len, double alpha) {
  if (epoch_len == 0) throw std::invalid_argument("epoch_len must be positive");
  return binomial_range(epoch_len, 2 * epoch_len - 1, 2 * epoch_len - 1, alpha);
}

/// Utility of a miner who cannot obtain internal tokens, relative to her prescribed utility.
inline double permissiveness(double share, double factor) {
  if (!(share > 0) || share > 1) throw std::invalid_argument("share must lie in (0, 1]");
  if (factor < 1) throw std::invalid_argument("factor must be >= 1");
  return 1 / (share + factor * (1 - share));
}

/// As permissiveness(), but accounting for the incumbents spending only (1 - rho) externally.
inline double permissiveness_with_rho(double share, double factor, double rho) {
  check_rho(rho);
  if (!(share > 0) || share > 1) throw std::invalid_argument("share must lie in (0, 1]");
  return 1 / (share + factor * (1 - rho) * (1 - share));
}

struct AttackCosts {
  double refunded = 1;
  double sabotage = 1;
};

inline AttackCosts attack_costs(double rho) {
  check_rho(rho);
  return {1.0, 1 - rho};
}

/// External spend per block, in value units. Nakamoto spends the whole reward externally.
inline double external_expense(double rho) {
  check_rho(rho);
  return 1 - rho;
}
inline double nakamoto_external_expense() { return 1.0; }

struct BinomialTail {
  double lower = 0;
  double upper = 0;
};

/// lower = P(n <= l b (1 - e)), upper = P(n > l b (1 + e)) for n ~ Bin(l, b).
inline BinomialTail binomial_tail(std::uint64_t epoch_len, double share, double rel_err) {
  if (!(rel_err > 0) || !(rel_err < 1)) throw std::invalid_argument("rel_err must lie in (0, 1)");
  const double mean = static_cast<double>(epoch_len) * share;
  const auto lo = static_cast<std::uint64_t>(std::floor(mean * (1 - rel_err) + 1e-9));
  const auto hi = static_cast<std::uint64_t>(std::floor(mean * (1 + rel_err) + 1e-9));
  BinomialTail t;
  t.lower = binomial_range(0, lo, epoch_len, share);
  t.upper = hi >= epoch_len ? 0.0 : binomial_range(hi + 1, epoch_len, epoch_len, share);
  return t;
}

/// Upper bound on the redistribution term a miner can receive, B^MI^2 / (B^MI + B_U).
inline double redistribution_bound(double internal_total, double user_balance) {
  return internal_total * internal_total / (internal_total + user_balance);
}

struct MetricReport {
  double epsilon = 0;
  std::vector<double> expected_weight;
  std::vector<double> normalized_weight;
  std::vector<double> permissiveness;
  double attack_cost_refunded = 1;
  double attack_cost_sabotage = 1;
  double external_expense = 1;
  double redistribution_bound = 0;
};

/// All closed-form metrics for one distribution under prescribed play, with sum b_i = l R.
inline MetricReport metric_report(const BalanceDistribution& dist, std::uint64_t epoch_len, double factor, double rho,
                                  double user_balance, double mint_per_block = 1) {
  dist.validate();
  MetricReport r;
  r.epsilon = epsilon(dist, epoch_len, factor);
  for (double b : dist.shares) {
    r.expected_weight.push_back(expected_weight(b, epoch_len, factor));
    r.normalized_weight.push_back(r.expected_weight.back() / b);
    r.permissiveness.push_back(permissiveness(b, factor));
  }
  const auto costs = attack_costs(rho);
  r.attack_cost_refunded = costs.refunded;
  r.attack_cost_sabotage = costs.sabotage;
  r.external_expense = external_expense(rho);
  r.redistribution_bound =
      redistribution_bound(rho * static_cast<double>(epoch_len) * mint_per_block, user_balance);
  return r;
}

}  // namespace heb
