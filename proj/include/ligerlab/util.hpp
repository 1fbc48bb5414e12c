#ifndef LIGERLAB_UTIL_HPP
#define LIGERLAB_UTIL_HPP

#include <cstdint>
#include <cstdlib>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ligerlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a, incrementally updatable.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& str(std::string_view s) {
    bytes(s.data(), s.size());
    return u64(s.size());
  }
  Fnv1a& u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    return bytes(buf, 8);
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t hash_string(std::string_view s) { return Fnv1a{}.str(s).value(); }

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent seed for a named random stream ("corpus",
/// "inputs", "init", "batching", ...) from a root seed.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name,
                                    std::uint64_t index = 0) {
  return mix64(mix64(root ^ hash_string(name)) + index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng(substream_seed(root, name, index));
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  // Explicit Fisher-Yates so orderings do not depend on the library's shuffle.
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

/// Worker count from LIGERLAB_THREADS, defaulting to 1.
inline int worker_threads() {
  if (const char* env = std::getenv("LIGERLAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace ligerlab

#endif  // LIGERLAB_UTIL_HPP
