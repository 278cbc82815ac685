#pragma once
// Three-stage serving pipeline: record I/O, dequantize+add reconstruction,
// and node computation run concurrently over depth-1 hand-offs. Outputs
// are bitwise identical to the sequential path; pipelining only hides
// latency.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "deltastore/executor.hpp"
#include "deltastore/loader.hpp"
#include "deltastore/store.hpp"

namespace deltastore {

// Single-producer single-consumer bounded channel.
template <typename T>
class BoundedChannel {
 public:
  explicit BoundedChannel(size_t capacity = 1) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_pop_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
    if (closed_) return;  // receiver gave up; drop
    queue_.push_back(std::move(item));
    cv_push_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_push_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    T item = std::move(queue_.front());
    queue_.pop_front();
    cv_pop_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
    cv_push_.notify_all();
    cv_pop_.notify_all();
  }

 private:
  const size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_push_;
  std::condition_variable cv_pop_;
  std::deque<T> queue_;
  bool closed_ = false;
};

struct PipelineOptions {
  LoadBits bits;
  // Artificial per-stage delays (I/O, reconstruction, compute) applied per
  // record; used to exercise ordering under skewed stage speeds.
  std::chrono::microseconds stage_delay[3] = {
      std::chrono::microseconds(0), std::chrono::microseconds(0),
      std::chrono::microseconds(0)};
};

ExecResult pipelined_load_execute(Store& store, const std::string& name,
                                  const std::map<std::string, Tensor>& inputs,
                                  const PipelineOptions& options = {});

}  // namespace deltastore
