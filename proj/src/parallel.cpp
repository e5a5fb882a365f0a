#include "vppe/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vppe {
namespace {

std::atomic<int> g_threads{0};

}  // namespace

int thread_count() {
  const int t = g_threads.load(std::memory_order_relaxed);
  if (t > 0) return t;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_thread_count(int threads) { g_threads.store(std::max(0, threads), std::memory_order_relaxed); }

void parallel_for_blocks(std::size_t num_blocks, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), num_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < num_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_block = num_blocks;
  std::exception_ptr err;
  auto work = [&] {
    for (std::size_t b = next.fetch_add(1); b < num_blocks; b = next.fetch_add(1)) {
      try {
        fn(b);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (b < err_block) {
          err_block = b;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  if (err) std::rethrow_exception(err);
}

}  // namespace vppe
