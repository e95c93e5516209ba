// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ravg {

// Shared worker pool for data-parallel loops. Work items are indexed, each
// index is processed by exactly one worker with a fixed internal loop order,
// so results are bit-identical for any thread count. RAVG_THREADS caps the
// pool size.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  int thread_count() const { return n_threads_; }

  // Runs fn(i) for i in [0, n). Blocks until all items are done. The calling
  // thread participates. Nested calls fall back to serial execution.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    bool expected = false;
    if (n == 1 || n_threads_ <= 1 ||
        !busy_.compare_exchange_strong(expected, true)) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_fn_ = &fn;
      job_n_ = n;
      next_.store(0);
      done_.store(0);
      ++generation_;
    }
    cv_.notify_all();
    run_items(fn, n);
    {
      // The job's std::function must outlive every worker that entered it.
      std::unique_lock<std::mutex> lk(mu_);
      cv_done_.wait(lk, [&] { return done_.load() >= job_n_ && active_ == 0; });
      job_fn_ = nullptr;
    }
    busy_.store(false);
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

 private:
  ThreadPool() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RAVG_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) n = cap;
    }
    if (n < 1) n = 1;
    n_threads_ = n;
    for (int t = 1; t < n; ++t) {
      workers_.emplace_back([this] { worker_main(); });
    }
  }

  void worker_main() {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* fn = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        fn = job_fn_;
        n = job_n_;
        if (fn) ++active_;
      }
      if (!fn) continue;
      run_items(*fn, n);
      {
        std::lock_guard<std::mutex> lk(mu_);
        --active_;
      }
      cv_done_.notify_all();
    }
  }

  void run_items(const std::function<void(std::size_t)>& fn, std::size_t n) {
    for (;;) {
      std::size_t i = next_.fetch_add(1);
      if (i >= n) break;
      fn(i);
      if (done_.fetch_add(1) + 1 >= n) cv_done_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, cv_done_;
  const std::function<void(std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0;
  int active_ = 0;
  std::atomic<std::size_t> next_{0}, done_{0};
  std::atomic<bool> busy_{false};
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  int n_threads_ = 1;
};

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  ThreadPool::instance().parallel_for(n, fn);
}

// Splits [0, n) into contiguous chunks processed in parallel. Each element
// is handled exactly once with the same within-chunk order as the serial
// loop, so elementwise work stays bit-deterministic.
inline void parallel_chunks(std::size_t n, std::size_t min_chunk,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
  const int nt = ThreadPool::instance().thread_count();
  if (nt <= 1 || n < 2 * min_chunk) {
    fn(0, n);
    return;
  }
  const std::size_t want = static_cast<std::size_t>(nt) * 4;
  const std::size_t chunks = std::min(want, (n + min_chunk - 1) / min_chunk);
  const std::size_t per = (n + chunks - 1) / chunks;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t b = c * per;
    const std::size_t e = std::min(n, b + per);
    if (b < e) fn(b, e);
  });
}

}  // namespace ravg
