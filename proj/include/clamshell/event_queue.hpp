#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace clamshell {

enum class EventKind : std::uint8_t {
  assignment_finish,
  recruitment_ready,
  retrain_done,
  maintenance_tick,
  batch_dispatch,
};

std::string to_string(EventKind kind);

// `payload` is an identifier whose meaning depends on `kind` (assignment id,
// recruit id, retrain id, batch index).
struct SimEvent {
  double time = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::maintenance_tick;
  std::uint64_t payload = 0;
};

class CausalityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Discrete-event timeline. Events come out in (time, sequence) order, the
/// sequence being the insertion order, so simultaneous events are totally
/// ordered and runs are reproducible.
class EventQueue {
 public:
  double now() const noexcept { return now_; }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }
  double next_time() const;

  // Throws CausalityError for times earlier than now().
  std::uint64_t schedule(double time, EventKind kind, std::uint64_t payload = 0);
  SimEvent pop();

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  double now_ = 0.0;
  std::uint64_t next_sequence_ = 0;
};

}  // namespace clamshell
