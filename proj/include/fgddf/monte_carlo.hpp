#pragma once

// Monte Carlo driver: runs are independent and seeded by (seed, run), so
// results do not depend on the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fgddf/evaluation.hpp"
#include "fgddf/scenarios/cl.hpp"
#include "fgddf/scenarios/tracking.hpp"

namespace fgddf {

inline constexpr const char* kThreadsEnv = "FGDDF_THREADS";

/// Worker count from FGDDF_THREADS, else the hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline RunResult run_scenario(const scenarios::ScenarioConfig& c, std::uint32_t run) {
  const bool keep = run < c.estimate_runs;
  RunResult r = c.scenario == "cl" ? scenarios::run_cl(c, run, keep) : scenarios::run_tracking(c, run, keep);
  if (run != 0) r.deliveries.clear();
  return r;
}

/// All runs, ordered by run index. `on_done` is called (serialized) after each run.
inline std::vector<RunResult> run_monte_carlo(const scenarios::ScenarioConfig& c, unsigned threads = 0,
                                              const std::function<void(const RunResult&)>& on_done = {}) {
  if (threads == 0) threads = thread_count();
  threads = std::min<unsigned>(threads, c.runs);
  std::vector<RunResult> results(c.runs);
  std::atomic<std::uint32_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::uint32_t r = next++; r < c.runs; r = next++) {
      results[r] = run_scenario(c, r);
      if (on_done) {
        std::lock_guard lock(mu);
        on_done(results[r]);
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace fgddf
