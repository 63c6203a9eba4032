#pragma once

#include <atomic>
#include <cstdint>

namespace dcs {

inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;

// Simulated time base shared by the highway, local interfaces, the plant and
// the scan engine of one node. Never moves backwards.
class VirtualClock {
 public:
  std::int64_t now() const { return now_ns_.load(std::memory_order_acquire); }

  // Returns the time after the advance.
  std::int64_t advance(std::int64_t ns) {
    if (ns <= 0) return now();
    return now_ns_.fetch_add(ns, std::memory_order_acq_rel) + ns;
  }

  void advance_to(std::int64_t t) {
    std::int64_t cur = now();
    while (t > cur &&
           !now_ns_.compare_exchange_weak(cur, t, std::memory_order_acq_rel)) {
    }
  }

 private:
  std::atomic<std::int64_t> now_ns_{0};
};

inline std::int64_t seconds_to_ns(double s) {
  return static_cast<std::int64_t>(s * static_cast<double>(kNanosPerSecond) + 0.5);
}

inline double ns_to_seconds(std::int64_t ns) {
  return static_cast<double>(ns) / static_cast<double>(kNanosPerSecond);
}

}  // namespace dcs
