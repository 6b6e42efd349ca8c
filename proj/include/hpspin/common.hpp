#ifndef HPSPIN_COMMON_HPP
#define HPSPIN_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace hpspin {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Raised when an argument lies outside the mathematical domain of an operation.
/// `boundary` carries the relevant domain edge (e.g. the floor of lambda_p) when
/// one exists, NaN otherwise.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what,
                       double boundary = std::numeric_limits<double>::quiet_NaN())
      : std::domain_error(what), boundary_(boundary) {}
  double boundary() const noexcept { return boundary_; }

 private:
  double boundary_;
};

/// A numerical guard refused to produce a result (ESS too small, multi-dominance
/// tie, coupling inside the critical band). Callers map this to exit code 3.
class GuardTrip : public std::runtime_error {
 public:
  explicit GuardTrip(const std::string& what) : std::runtime_error(what) {}
};

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

/// Streaming log-sum-exp against the running maximum.
class LogSumAccumulator {
 public:
  void add(double log_term) {
    if (log_term == kNegInf) return;
    if (log_term <= max_) {
      scaled_ += std::exp(log_term - max_);
    } else {
      scaled_ = scaled_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(scaled_); }
  bool empty() const { return max_ == kNegInf; }

 private:
  double max_ = kNegInf;
  double scaled_ = 0.0;
};

inline double log_sum_exp(std::span<const double> xs) {
  LogSumAccumulator acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

/// Natural log of the binomial coefficient C(n, k).
inline double log_binomial(std::size_t n, std::size_t k) {
  if (k > n) return kNegInf;
  const auto dn = static_cast<double>(n);
  const auto dk = static_cast<double>(k);
  return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0);
}

/// Exact C(n, k) when it fits in 64 bits, otherwise nullopt-like sentinel 0.
inline unsigned long long binomial_u64(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned long long r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const unsigned long long num = n - k + i;
    if (r > std::numeric_limits<unsigned long long>::max() / num) return 0;
    r = r * num / i;
  }
  return r;
}

}  // namespace hpspin

#endif
