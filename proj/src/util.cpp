#include "util.hpp"

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ebert {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
  uint64_t sm = seed;
  for (auto& word : state_) word = splitmix64(sm);
}

uint64_t Rng::next_u64() {
  uint64_t result = rotl(state_[1] * 5, 7) * 9;
  uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

uint64_t Rng::uniform_below(uint64_t n) {
  if (n == 0) throw_invalid("uniform_below: n must be positive");
  uint64_t threshold = (0 - n) % n;
  for (;;) {
    uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + spare_ * stddev;
  }
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + r * std::cos(theta) * stddev;
}

std::string Rng::serialize() const {
  char buf[160];
  uint64_t spare_bits;
  std::memcpy(&spare_bits, &spare_, sizeof spare_bits);
  std::snprintf(buf, sizeof buf, "%016llx,%016llx,%016llx,%016llx,%d,%016llx",
                (unsigned long long)state_[0], (unsigned long long)state_[1],
                (unsigned long long)state_[2], (unsigned long long)state_[3],
                has_spare_ ? 1 : 0, (unsigned long long)spare_bits);
  return buf;
}

Rng Rng::deserialize(const std::string& text) {
  auto parts = split(text, ',');
  if (parts.size() != 6) throw_data("rng state: expected 6 fields, got " + std::to_string(parts.size()));
  Rng rng;
  auto parse_hex = [](const std::string& s) {
    uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw_data("rng state: bad hex word '" + s + "'");
    return v;
  };
  for (int i = 0; i < 4; ++i) rng.state_[size_t(i)] = parse_hex(parts[size_t(i)]);
  rng.has_spare_ = parts[4] == "1";
  uint64_t spare_bits = parse_hex(parts[5]);
  std::memcpy(&rng.spare_, &spare_bits, sizeof spare_bits);
  return rng;
}

uint64_t mix_seed(uint64_t base, uint64_t stream_tag) {
  uint64_t x = base ^ (0x2545f4914f6cdd1dULL * (stream_tag + 1));
  return splitmix64(x);
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == delim) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string to_lower_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  }
  return s;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) throw_data(what + ": cannot parse number '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) throw_data(what + ": cannot parse integer '" + s + "'");
  return v;
}

void for_each_line(const std::string& path, const std::function<void(size_t, const std::string&)>& fn) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open file: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fn(line_no, line);
  }
  if (in.bad()) throw_io("read error on file: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open file for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw_io("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw_io("rename failed: " + tmp + " -> " + path + " (" + ec.message() + ")");
}

AtomicFileWriter::AtomicFileWriter(std::string path) : path_(std::move(path)) {}

AtomicFileWriter::~AtomicFileWriter() {
  if (!finalized_) {
    std::error_code ec;
    std::filesystem::remove(path_ + ".tmp", ec);
  }
}

void AtomicFileWriter::write_line(const std::string& line) {
  buffer_ += line;
  buffer_ += '\n';
}

void AtomicFileWriter::finalize() {
  if (finalized_) return;
  atomic_write_file(path_, buffer_);
  finalized_ = true;
}

}  // namespace ebert
