#include "tnfeat/error.hpp"
#include "tnfeat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tnfeat {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidMode: return "InvalidMode";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::UndefinedFit: return "UndefinedFit";
    case Errc::NoClassesFound: return "NoClassesFound";
    case Errc::IoError: return "IoError";
    case Errc::StratificationImpossible: return "StratificationImpossible";
    case Errc::MissingClass: return "MissingClass";
    case Errc::EmbeddingMismatch: return "EmbeddingMismatch";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::EmptyEvaluation: return "EmptyEvaluation";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::LeakageDetected: return "LeakageDetected";
    case Errc::Unreadable: return "Unreadable";
  }
  return "Unknown";
}

std::size_t resolve_workers(std::size_t requested) noexcept {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min(resolve_workers(workers), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tnfeat
