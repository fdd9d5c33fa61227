#pragma once

#include <cstdint>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace cfrec {

/// Error categories; the CLI maps them to process exit codes.
enum class ErrorKind : int {
  kUsage = 1,    // bad flags, bad config keys, inconsistent options
  kData = 2,     // malformed files, out-of-range values, missing inputs
  kNumeric = 3,  // divergence, non-finite values, singular systems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

  static Error usage(const std::string& what) { return Error(ErrorKind::kUsage, what); }
  static Error data(const std::string& what) { return Error(ErrorKind::kData, what); }
  static Error numeric(const std::string& what) { return Error(ErrorKind::kNumeric, what); }

 private:
  ErrorKind kind_;
};

/// Non-fatal diagnostics (duplicate entries, rank-deficient PCA, ...).
inline void warn(const std::string& msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[cfrec] warning: " << msg << "\n";
}

/// Derives an independent stream seed from a base seed and a tag.
/// Used so that every epoch/row/generation gets its own deterministic
/// generator regardless of thread count or resume point (splitmix64 mix).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

}  // namespace cfrec
