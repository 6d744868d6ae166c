// Shared small utilities: error types, row-major matrix, compensated sums,
// and a fixed-chunk parallel loop with deterministic reduction order.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gapinn {

// Numeric failure tied to a specific entry (e.g. a NaN gradient component).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Text-format failure carrying the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested operation does not exist for the given object (e.g. an analytic
// solution for a dataset-backed problem).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Deliberately minimal: the hot kernels in
// network.hpp work on raw rows.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * std::size_t(c), 0.0) {}

  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.assign(std::size_t(r) * std::size_t(c), 0.0);
  }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  double* row(int r) { return data.data() + std::size_t(r) * cols; }
  const double* row(int r) const { return data.data() + std::size_t(r) * cols; }

  double& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[std::size_t(r) * cols + c]; }
};

// Neumaier-compensated accumulator. Loss reductions and weight
// renormalizations use this so the Σω=1 style invariants hold to ~1e-15
// regardless of set size.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

// Persistent worker pool. Jobs are indexed; callers that need deterministic
// floating-point results write into per-job slots and reduce in job order.
class ThreadPool {
 public:
  explicit ThreadPool(int threads) {
    int n = threads > 0 ? threads : 1;
    for (int i = 0; i < n - 1; ++i) {
      workers_.emplace_back([this, i] { worker_loop(i + 1); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const { return int(workers_.size()) + 1; }

  // Runs job(0..njobs-1, slot), blocking until all complete. The calling
  // thread participates as slot 0; workers use slots 1..size()-1. Slots let
  // callers reuse per-thread scratch without affecting results. Exceptions
  // from jobs are rethrown (first one wins).
  void run(int njobs, const std::function<void(int, int)>& job) {
    if (njobs <= 0) return;
    if (workers_.empty() || njobs == 1) {
      for (int i = 0; i < njobs; ++i) job(i, 0);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(mu_);
      job_ = &job;
      next_ = 0;
      total_ = njobs;
      pending_ = njobs;
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    drain();
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

  // Pool shared across the process, sized from GAPINN_THREADS or the
  // hardware. Thread count never affects results, only speed.
  static ThreadPool& shared() {
    static ThreadPool pool(default_threads());
    return pool;
  }

  static int default_threads() {
    if (const char* env = std::getenv("GAPINN_THREADS")) {
      int n = std::atoi(env);
      if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
  }

 private:
  void drain() {
    while (true) {
      int idx;
      {
        std::unique_lock<std::mutex> lk(mu_);
        if (next_ >= total_) break;
        idx = next_++;
      }
      run_one(idx, 0);
    }
  }

  void run_one(int idx, int slot) {
    try {
      (*job_)(idx, slot);
    } catch (...) {
      std::unique_lock<std::mutex> lk(mu_);
      if (!error_) error_ = std::current_exception();
    }
    std::unique_lock<std::mutex> lk(mu_);
    if (--pending_ == 0) done_cv_.notify_all();
  }

  void worker_loop(int slot) {
    std::uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      while (true) {
        int idx;
        {
          std::unique_lock<std::mutex> lk(mu_);
          if (next_ >= total_) break;
          idx = next_++;
        }
        run_one(idx, slot);
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int, int)>* job_ = nullptr;
  int next_ = 0;
  int total_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

// Splits n items into chunks of at most chunk_size, runs body(chunk, begin,
// end) across the pool. Chunk boundaries depend only on (n, chunk_size), so
// per-chunk partial results reduced in chunk order are reproducible for any
// thread count.
inline int chunk_count(int n, int chunk_size) {
  return n <= 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

inline void parallel_chunks(ThreadPool& pool, int n, int chunk_size,
                            const std::function<void(int chunk, int begin, int end, int slot)>& body) {
  int chunks = chunk_count(n, chunk_size);
  pool.run(chunks, [&](int c, int slot) {
    int begin = c * chunk_size;
    int end = std::min(n, begin + chunk_size);
    body(c, begin, end, slot);
  });
}

}  // namespace gapinn
