#ifndef FCLUST_DRAW_STORE_HPP
#define FCLUST_DRAW_STORE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fclust/model_state.hpp"
#include "fclust/spline_basis.hpp"

namespace fclust {

// Everything recorded per sweep.  The latent utilities and random effects
// stay out of the store (they live in the checkpoint); curve values are
// evaluated on the output grid at record time.
struct SweepRecord {
  std::uint32_t sweep = 0;
  double log_post = 0.0;  // complete-data log posterior, used as relabel pivot
  Vector beta;
  Matrix psi;
  Vector tau;                        // K
  Vector v;                          // K sticks
  std::vector<std::uint16_t> alloc;  // N
  std::vector<GammaSet> gamma;       // K
  std::vector<Vector> phi;           // K, varying length
  std::vector<Matrix> alpha;         // K matrices, G x p
};

struct StoreDims {
  std::int64_t n_subjects = 0;
  std::int64_t p = 0, q = 0, r = 0;
  std::int64_t K = 0;
  std::vector<std::int64_t> terms_per_cov;  // M_l + 2
  Vector grid;
  std::uint64_t config_hash = 0;
  std::uint64_t chain_seed = 0;

  bool compatible(const StoreDims& o) const;
};

struct DrawStoreData {
  StoreDims dims;
  std::vector<SweepRecord> records;
};

// Streaming sink so long chains can go straight to disk.
class DrawSink {
 public:
  virtual ~DrawSink() = default;
  virtual void record(const SweepRecord& rec) = 0;
};

class MemorySink : public DrawSink {
 public:
  explicit MemorySink(DrawStoreData& store) : store_(&store) {}
  void record(const SweepRecord& rec) override { store_->records.push_back(rec); }

 private:
  DrawStoreData* store_;
};

// Append-only binary log: versioned header with dimensions, then
// length-prefixed per-sweep blocks.
class FileSink : public DrawSink {
 public:
  // Creates the file and writes the header, or appends when it exists and
  // the header matches.
  FileSink(const std::string& path, const StoreDims& dims);
  ~FileSink() override;
  void record(const SweepRecord& rec) override;
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

DrawStoreData load_draw_store(const std::string& path);

// Full chain snapshot sufficient to resume a run bit-identically.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t chain_seed = 0;
  std::uint32_t next_sweep = 0;  // first sweep index not yet executed
  ChainState state;
};

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fclust

#endif
