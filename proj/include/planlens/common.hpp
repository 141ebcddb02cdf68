#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace planlens {

inline constexpr std::string_view kVersion = "1.0.0";

// Bad input or configuration. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical degeneracy (NaN iterates, singular structure). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; indicates a bug or inconsistent inputs.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Deterministic pseudo-random source.
///
/// std::mt19937_64 has a fully specified output sequence; the distributions in
/// <random> do not, so every derived draw is computed here instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Formats with 12 significant digits; the single numeric format of all outputs.
std::string format_number(double value);
/// Rounds to the value printed by format_number.
double round12(double value);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the schedule never affects output.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body);

std::string sha256_hex(std::string_view bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

bool is_valid_utf8(std::string_view text);

}  // namespace planlens
