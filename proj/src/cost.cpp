#include "clamshell/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clamshell {

Money Money::from_dollars(double dollars) { return Money{std::llround(dollars * 1e6)}; }

std::string to_string(TerminatedPay pay) {
  return pay == TerminatedPay::full ? "full" : "prorated";
}

TerminatedPay terminated_pay_from_string(const std::string& name) {
  if (name == "full") return TerminatedPay::full;
  if (name == "prorated") return TerminatedPay::prorated;
  throw std::invalid_argument("terminated_pay must be 'full' or 'prorated', got '" + name + "'");
}

CostComponent component_of(const PayEvent& event) noexcept {
  if (std::holds_alternative<IdleTime>(event)) return CostComponent::wait;
  if (std::holds_alternative<Recruitment>(event)) return CostComponent::recruitment;
  return CostComponent::work;
}

Money price(const PayEvent& event, const CostRates& rates) {
  struct Visitor {
    const CostRates& r;
    Money operator()(const IdleTime& e) const {
      return Money::from_dollars(e.seconds / 60.0 * r.wait_per_minute);
    }
    Money operator()(const FinishedWork& e) const {
      return Money::from_dollars(e.records * r.per_record);
    }
    Money operator()(const TerminatedWork& e) const {
      double fraction = 1.0;
      if (r.terminated_pay == TerminatedPay::prorated)
        fraction = e.due > 0.0 ? std::clamp(e.elapsed / e.due, 0.0, 1.0) : 1.0;
      return Money::from_dollars(e.records * r.per_record * fraction);
    }
    Money operator()(const Recruitment&) const { return Money::from_dollars(r.recruit_fee); }
  };
  return std::visit(Visitor{rates}, event);
}

void CostLedger::add(CostComponent component, Money amount) {
  if (amount.micros < 0) throw std::invalid_argument("negative pay amount");
  switch (component) {
    case CostComponent::wait: wait += amount; break;
    case CostComponent::work: work += amount; break;
    case CostComponent::recruitment: recruitment += amount; break;
  }
}

CostLedger accrue_costs(std::span<const PayEvent> events, const CostRates& rates) {
  CostLedger ledger;
  for (const auto& e : events) ledger.add(component_of(e), price(e, rates));
  return ledger;
}

double objective_denominator(double latency_s, double cost_dollars, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
  return beta * latency_s + (1.0 - beta) * cost_dollars;
}

double objective(double latency_s, double cost_dollars, double beta) {
  const double d = objective_denominator(latency_s, cost_dollars, beta);
  if (d == 0.0) throw std::domain_error("objective denominator is zero");
  return 1.0 / d;
}

}  // namespace clamshell
