#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebert {

enum class ErrorKind { InvalidArgument, Io, Data, Numeric, Internal };

/// All core errors derive from this; the C API maps ErrorKind to status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }

/// Deterministic xoshiro256** generator with explicit, serializable state.
/// std::mt19937 state is awkward to persist exactly; checkpoint resume
/// requires bit-identical RNG streams, so we own the generator.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();
  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  uint64_t uniform_below(uint64_t n);
  double normal(double mean, double stddev);

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

 private:
  Rng() = default;
  std::array<uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stable mixing for deriving per-purpose stream seeds from one base seed.
uint64_t mix_seed(uint64_t base, uint64_t stream_tag);

// ---- string helpers ----

std::vector<std::string> split(const std::string& s, char delim);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string to_lower_ascii(std::string s);
std::string trim(const std::string& s);
bool starts_with(const std::string& s, const std::string& prefix);

/// Round-trip-exact double formatting (17 significant digits).
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

// ---- file helpers ----

/// Calls fn(line_number, line) for every line; line numbers start at 1.
void for_each_line(const std::string& path, const std::function<void(size_t, const std::string&)>& fn);

std::string read_file(const std::string& path);

/// Writes content to path via a temp file + rename so readers never observe
/// a partially written file.
void atomic_write_file(const std::string& path, const std::string& content);

/// Buffered CSV/text writer that lands atomically on finalize(). An
/// interrupted run leaves only the .tmp file behind.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::string path);
  ~AtomicFileWriter();
  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

  void write_line(const std::string& line);
  void finalize();

 private:
  std::string path_;
  std::string buffer_;
  bool finalized_ = false;
};

}  // namespace ebert
