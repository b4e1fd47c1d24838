#ifndef FCLUST_RNG_HPP
#define FCLUST_RNG_HPP

#include <cstdint>

namespace fclust {

// Counter-based splittable random stream.  A stream is identified by a
// 64-bit key; draws are a keyed bijective mix of an incrementing counter,
// so the variate sequence depends only on (key, draw index).  fork(tag)
// derives a child key from the parent key and the tag without consuming
// any parent state, which makes substreams independent of the order in
// which the parent is used.  Sampler substreams are derived along the
// path (chain, sweep, step, subject/cluster).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Child stream for a fixed tag; deterministic, position-independent.
  RngStream fork(std::uint64_t tag) const;
  // Two-level convenience fork: fork(a).fork(b).
  RngStream fork(std::uint64_t a, std::uint64_t b) const;

  std::uint64_t next_u64();
  // Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform();
  // Standard normal via the inverse-CDF map (one uniform per draw).
  double normal();

  std::uint64_t key() const { return key_; }

 private:
  RngStream(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}
  std::uint64_t key_;
  std::uint64_t counter_;
};

namespace detail {
std::uint64_t mix64(std::uint64_t z);
}

// Normal quantile function (Wichura AS241, double precision).
double normal_quantile(double p);
// Phi(x) and the survival function 1 - Phi(x), both accurate in the tails.
double normal_cdf(double x);
double normal_sf(double x);

}  // namespace fclust

#endif
