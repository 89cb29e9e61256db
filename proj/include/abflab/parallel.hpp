#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace abflab {

/// Fixed-size pool of workers executing static-partition loops.
///
/// Chunk boundaries depend only on the loop length and worker count, and every
/// reduction in this library happens after the loop in index order, so results
/// never depend on the number of threads.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads = 1);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return workers_.size() + 1; }

  /// Calls body(begin, end) on disjoint chunks covering [0, n); returns when all finish.
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

 private:
  void worker_loop(std::size_t rank);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
  std::size_t n_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

/// Runs body over [0, n) on the pool, or inline when pool is null.
inline void parallel_for(WorkerPool* pool, std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  if (pool == nullptr || pool->size() == 1 || n < 2) {
    body(0, n);
    return;
  }
  pool->parallel_for(n, body);
}

}  // namespace abflab
