#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace afgn {

namespace detail {

inline int& thread_budget() {
  static int budget = 0;  // 0 = hardware default
  return budget;
}

inline bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}

// Persistent worker pool. Keeping workers alive lets kernels reuse
// thread_local scratch instead of refaulting megabyte buffers every call.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  size_t worker_count() const { return threads_.size() + 1; }

  void run(size_t count, size_t width, const std::function<void(size_t)>& fn) {
    std::lock_guard<std::mutex> job_guard(job_mutex_);
    {
      std::lock_guard<std::mutex> lk(m_);
      fn_ = &fn;
      count_ = count;
      next_.store(0, std::memory_order_relaxed);
      done_.store(0, std::memory_order_relaxed);
      active_target_ = std::min(width, threads_.size() + 1) - 1;
      ++gen_;
    }
    if (active_target_ > 0) start_cv_.notify_all();
    work(fn, count);
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [&] { return done_.load() >= count_; });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

 private:
  Pool() {
    unsigned hw = std::thread::hardware_concurrency();
    size_t n = hw > 1 ? hw - 1 : 0;
    threads_.reserve(n);
    for (size_t i = 0; i < n; ++i)
      threads_.emplace_back([this] { worker_loop(); });
  }

  void work(const std::function<void(size_t)>& fn, size_t count) {
    in_parallel_region() = true;
    for (;;) {
      size_t i = next_.fetch_add(1);
      if (i >= count) break;
      fn(i);
      if (done_.fetch_add(1) + 1 == count) {
        std::lock_guard<std::mutex> lk(m_);
        done_cv_.notify_all();
      }
    }
    in_parallel_region() = false;
  }

  void worker_loop() {
    uint64_t seen = 0;
    std::unique_lock<std::mutex> lk(m_);
    for (;;) {
      start_cv_.wait(lk, [&] { return stop_ || gen_ != seen; });
      if (stop_) return;
      seen = gen_;
      if (active_target_ == 0) continue;
      const std::function<void(size_t)>* fn = fn_;
      size_t count = count_;
      lk.unlock();
      work(*fn, count);
      lk.lock();
    }
  }

  std::mutex job_mutex_;  // serializes concurrent run() callers
  std::mutex m_;
  std::condition_variable start_cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(size_t)>* fn_ = nullptr;
  size_t count_ = 0;
  size_t active_target_ = 0;
  std::atomic<size_t> next_{0};
  std::atomic<size_t> done_{0};
  uint64_t gen_ = 0;
  bool stop_ = false;
};

}  // namespace detail

// Caps worker participation in parallel_for. 0 restores hardware default.
inline void set_num_threads(int n) { detail::thread_budget() = n < 0 ? 0 : n; }

inline int num_threads() {
  int budget = detail::thread_budget();
  if (budget > 0) return budget;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count). Each index is claimed by exactly one
// worker and writes only its own outputs, so results are independent of
// scheduling and thread count. Nested calls degrade to a serial loop.
template <typename Fn>
void parallel_for(size_t count, Fn&& fn) {
  if (count == 0) return;
  int width = num_threads();
  if (width <= 1 || count == 1 || detail::in_parallel_region()) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::function<void(size_t)> wrapped = std::forward<Fn>(fn);
  detail::Pool::instance().run(count, static_cast<size_t>(width), wrapped);
}

// Thread-local growable scratch, distinct per (type, slot). Persistent pool
// workers keep these across calls, avoiding refaults in hot kernels.
template <typename T, int Slot>
std::vector<T>& tls_scratch(size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace afgn
