#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <variant>

namespace clamshell {

/// Currency in integer micro-dollars, so ledger sums are exact.
struct Money {
  std::int64_t micros = 0;

  static Money from_dollars(double dollars);
  double dollars() const noexcept { return static_cast<double>(micros) * 1e-6; }

  Money& operator+=(Money other) noexcept {
    micros += other.micros;
    return *this;
  }
  friend Money operator+(Money a, Money b) noexcept { return Money{a.micros + b.micros}; }
  friend auto operator<=>(Money, Money) = default;
};

enum class TerminatedPay { full, prorated };

std::string to_string(TerminatedPay pay);
TerminatedPay terminated_pay_from_string(const std::string& name);

struct CostRates {
  double wait_per_minute = 0.05;
  double per_record = 0.02;
  double recruit_fee = 0.10;
  TerminatedPay terminated_pay = TerminatedPay::full;

  bool operator==(const CostRates&) const = default;
};

// Raw billable facts emitted by the simulation.
struct IdleTime {
  double seconds = 0.0;
};
struct FinishedWork {
  std::uint32_t records = 0;
};
struct TerminatedWork {
  std::uint32_t records = 0;
  double elapsed = 0.0;  // time worked before termination
  double due = 0.0;      // sampled full duration
};
struct Recruitment {};

using PayEvent = std::variant<IdleTime, FinishedWork, TerminatedWork, Recruitment>;

enum class CostComponent { wait, work, recruitment };

CostComponent component_of(const PayEvent& event) noexcept;
Money price(const PayEvent& event, const CostRates& rates);

struct CostLedger {
  Money wait;
  Money work;
  Money recruitment;

  Money total() const noexcept { return wait + work + recruitment; }
  void add(CostComponent component, Money amount);
  bool operator==(const CostLedger&) const = default;
};

CostLedger accrue_costs(std::span<const PayEvent> events, const CostRates& rates);

// 1 / (beta l + (1 - beta) c). Throws std::domain_error on a zero
// denominator and std::invalid_argument for beta outside [0,1].
double objective(double latency_s, double cost_dollars, double beta);
double objective_denominator(double latency_s, double cost_dollars, double beta);

}  // namespace clamshell
