#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace secfpp {

// Runs fn(i) for i in [0, count). Work is claimed dynamically but each
// index writes only its own output slot, so results do not depend on the
// schedule. The first exception thrown is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Wall-clock per protocol phase, summed over every party in a round.
struct PhaseTimes {
  double share = 0;
  double distance = 0;
  double decode = 0;
  double aggregate = 0;
  double server_cluster = 0;

  PhaseTimes& operator+=(const PhaseTimes& o) {
    share += o.share;
    distance += o.distance;
    decode += o.decode;
    aggregate += o.aggregate;
    server_cluster += o.server_cluster;
    return *this;
  }
};

}  // namespace secfpp
