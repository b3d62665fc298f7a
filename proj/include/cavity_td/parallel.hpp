// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_PARALLEL_HPP
#define CAVITY_TD_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cavity_td
{

// 0 means "use the hardware concurrency".
inline unsigned resolve_threads(unsigned requested)
{
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return requested == 0 ? hw : requested;
}

// Calls f(i) for i in [0, n) on up to `threads` workers. Each index runs exactly once;
// the first exception is rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F &&f)
{
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; i++)
    {
      f(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]
  {
    for (std::size_t i = next++; i < n && !failed; i = next++)
    {
      try
      {
        f(i);
      }
      catch (...)
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error)
        {
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; w++)
  {
    pool.emplace_back(work);
  }
  for (auto &t : pool)
  {
    t.join();
  }
  if (error)
  {
    std::rethrow_exception(error);
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_PARALLEL_HPP
