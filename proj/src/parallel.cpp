#include "abflab/parallel.hpp"

#include <algorithm>

namespace abflab {

namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts, std::size_t rank) {
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  const std::size_t begin = rank * base + std::min(rank, extra);
  const std::size_t end = begin + base + (rank < extra ? 1 : 0);
  return {begin, end};
}

}  // namespace

WorkerPool::WorkerPool(std::size_t threads) {
  const std::size_t extra = threads > 1 ? threads - 1 : 0;
  workers_.reserve(extra);
  for (std::size_t r = 0; r < extra; ++r) workers_.emplace_back([this, r] { worker_loop(r + 1); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  start_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    n_ = n;
    pending_ = workers_.size();
    ++generation_;
  }
  start_cv_.notify_all();

  const auto [b, e] = chunk(n, size(), 0);
  if (b < e) body(b, e);

  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  body_ = nullptr;
}

void WorkerPool::worker_loop(std::size_t rank) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* body = nullptr;
    std::size_t n = 0;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      body = body_;
      n = n_;
    }
    const auto [b, e] = chunk(n, size(), rank);
    if (b < e) (*body)(b, e);
    {
      std::lock_guard lock(mutex_);
      --pending_;
    }
    done_cv_.notify_one();
  }
}

}  // namespace abflab
