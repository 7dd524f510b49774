#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace promptseg {

// ----------------------------- errors -----------------------------

enum class ErrorCode {
  invalid_argument,
  invalid_image,
  shape_mismatch,
  backend_unavailable,
  non_finite_relevance,
  empty_view_set,
  no_signal,
  low_confidence_channel,
  click_collision,
  model_unavailable,
  divergence,
  missing_file,
  dataset_not_found,
  io_error,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

// ----------------------------- 2-D field -----------------------------

// Row-major h x w grid. The workhorse container for masks, relevance
// maps, and per-channel planes.
template <typename T>
struct Field {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Field() = default;
  Field(int h, int w, T fill = T{}) : height(h), width(w), data(size_t(h) * size_t(w), fill) {}

  T& at(int y, int x) { return data[size_t(y) * width + x]; }
  const T& at(int y, int x) const { return data[size_t(y) * width + x]; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Field& o) const { return height == o.height && width == o.width; }
  bool in_bounds(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }

  bool operator==(const Field& o) const {
    return height == o.height && width == o.width && data == o.data;
  }
};

using FloatField = Field<float>;
using ByteField = Field<uint8_t>;

inline void require_same_shape(const FloatField& a, const FloatField& b, const char* ctx) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::shape_mismatch, std::string(ctx) + ": field shapes differ (" +
                                        std::to_string(a.height) + "x" + std::to_string(a.width) +
                                        " vs " + std::to_string(b.height) + "x" +
                                        std::to_string(b.width) + ")");
  }
}

// Min-max normalization to [0,1]. A constant field (max == min) has no
// usable signal and maps to all-zero; callers treat that as low confidence.
inline bool minmax_normalize(FloatField& f) {
  if (f.empty()) return false;
  float lo = f.data[0], hi = f.data[0];
  for (float v : f.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) {
    std::fill(f.data.begin(), f.data.end(), 0.0f);
    return false;
  }
  const float scale = 1.0f / (hi - lo);
  for (float& v : f.data) v = (v - lo) * scale;
  return true;
}

inline bool all_finite(const FloatField& f) {
  for (float v : f.data)
    if (!std::isfinite(v)) return false;
  return true;
}

// ----------------------------- pixels -----------------------------

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

// ----------------------------- seeded randomness -----------------------------

// splitmix64: used both as a stream generator and to derive sub-seeds.
// Distributions are hand-rolled on top of it so outputs are reproducible
// bit-for-bit regardless of the standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + int(below(uint64_t(hi - lo + 1)));
  }

  // Box-Muller; one value per call, no cached spare (keeps the stream
  // position independent of call parity).
  double gaussian(double mean = 0.0, double sigma = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  uint64_t state_;
};

// Stable seed derivation: mixes a master seed with a tag string so that
// independent consumers (per view, per image, per iteration) get
// decorrelated, reproducible streams.
inline uint64_t derive_seed(uint64_t master, const std::string& tag) {
  uint64_t h = 1469598103934665603ULL ^ master;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // final avalanche
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

inline uint64_t hash_bytes(const void* ptr, size_t n, uint64_t seed = 1469598103934665603ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(ptr);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace promptseg
