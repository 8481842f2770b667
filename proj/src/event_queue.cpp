#include "clamshell/event_queue.hpp"

#include <cmath>

namespace clamshell {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::assignment_finish: return "assignment_finish";
    case EventKind::recruitment_ready: return "recruitment_ready";
    case EventKind::retrain_done: return "retrain_done";
    case EventKind::maintenance_tick: return "maintenance_tick";
    case EventKind::batch_dispatch: return "batch_dispatch";
  }
  return "unknown";
}

double EventQueue::next_time() const {
  if (heap_.empty()) throw std::logic_error("event queue is empty");
  return heap_.top().time;
}

std::uint64_t EventQueue::schedule(double time, EventKind kind, std::uint64_t payload) {
  if (!(time >= now_) || !std::isfinite(time))
    throw CausalityError("event '" + to_string(kind) + "' scheduled at " + std::to_string(time) +
                         " before now " + std::to_string(now_));
  const auto seq = next_sequence_++;
  heap_.push(SimEvent{time, seq, kind, payload});
  return seq;
}

SimEvent EventQueue::pop() {
  if (heap_.empty()) throw std::logic_error("event queue is empty");
  SimEvent ev = heap_.top();
  heap_.pop();
  now_ = ev.time;
  return ev;
}

}  // namespace clamshell
