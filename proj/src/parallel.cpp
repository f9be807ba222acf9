#include "qhdboot/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "qhdboot/error.hpp"

namespace qhdboot {

namespace {
std::atomic<std::size_t> g_thread_budget{0};
}

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::empty_sample: return "EmptySample";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::level_out_of_range: return "LevelOutOfRange";
    case ErrorCode::norm_infinite: return "NormInfinite";
    case ErrorCode::range_too_small: return "RangeTooSmall";
    case ErrorCode::lattice_mismatch: return "LatticeMismatch";
    case ErrorCode::non_integrable: return "NonIntegrable";
    case ErrorCode::non_integrable_direction: return "NonIntegrableDirection";
    case ErrorCode::moment_diverges: return "MomentDiverges";
    case ErrorCode::block_length_invalid: return "BlockLengthInvalid";
    case ErrorCode::path_too_short: return "PathTooShort";
    case ErrorCode::factorization_failed: return "FactorizationFailed";
    case ErrorCode::config_invalid: return "ConfigInvalid";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

void set_thread_budget(std::size_t threads) { g_thread_budget.store(threads); }

std::size_t thread_budget() {
  if (const auto budget = g_thread_budget.load(); budget > 0) return budget;
  if (const char* env = std::getenv("QHD_BOOT_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
      // ignored: malformed env var falls through to hardware concurrency
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_budget(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace qhdboot
