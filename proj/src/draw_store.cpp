#include "fclust/draw_store.hpp"

#include <cstdio>
#include <cstring>

#include "fclust/errors.hpp"

namespace fclust {

namespace {

constexpr std::uint32_t kStoreMagic = 0x46435331;  // "FCS1"
constexpr std::uint32_t kStoreVersion = 1;
constexpr std::uint32_t kCheckpointMagic = 0x46434B31;  // "FCK1"
constexpr std::uint32_t kCheckpointVersion = 1;

class Writer {
 public:
  explicit Writer(std::FILE* f) : f_(f) {}
  void raw(const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f_) != n) throw IoError("draw store write failed");
  }
  template <class T>
  void pod(T v) {
    raw(&v, sizeof(T));
  }
  void vec(const Vector& v) {
    pod<std::int64_t>(v.size());
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  void mat(const Matrix& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }

 private:
  std::FILE* f_;
};

class Reader {
 public:
  explicit Reader(std::FILE* f) : f_(f) {}
  bool raw(void* p, std::size_t n) { return std::fread(p, 1, n, f_) == n; }
  template <class T>
  T pod() {
    T v;
    if (!raw(&v, sizeof(T))) throw IoError("draw store truncated");
    return v;
  }
  Vector vec() {
    auto n = pod<std::int64_t>();
    Vector v(n);
    if (!raw(v.data(), sizeof(double) * static_cast<std::size_t>(n)))
      throw IoError("draw store truncated");
    return v;
  }
  Matrix mat() {
    auto r = pod<std::int64_t>();
    auto c = pod<std::int64_t>();
    Matrix m(r, c);
    if (!raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size())))
      throw IoError("draw store truncated");
    return m;
  }

 private:
  std::FILE* f_;
};

void write_dims(Writer& w, const StoreDims& d) {
  w.pod<std::int64_t>(d.n_subjects);
  w.pod<std::int64_t>(d.p);
  w.pod<std::int64_t>(d.q);
  w.pod<std::int64_t>(d.r);
  w.pod<std::int64_t>(d.K);
  w.pod<std::int64_t>(static_cast<std::int64_t>(d.terms_per_cov.size()));
  for (auto t : d.terms_per_cov) w.pod<std::int64_t>(t);
  w.vec(d.grid);
  w.pod<std::uint64_t>(d.config_hash);
  w.pod<std::uint64_t>(d.chain_seed);
}

StoreDims read_dims(Reader& r) {
  StoreDims d;
  d.n_subjects = r.pod<std::int64_t>();
  d.p = r.pod<std::int64_t>();
  d.q = r.pod<std::int64_t>();
  d.r = r.pod<std::int64_t>();
  d.K = r.pod<std::int64_t>();
  auto n = r.pod<std::int64_t>();
  d.terms_per_cov.resize(static_cast<std::size_t>(n));
  for (auto& t : d.terms_per_cov) t = r.pod<std::int64_t>();
  d.grid = r.vec();
  d.config_hash = r.pod<std::uint64_t>();
  d.chain_seed = r.pod<std::uint64_t>();
  return d;
}

void write_record(Writer& w, const SweepRecord& rec) {
  w.pod<std::uint32_t>(rec.sweep);
  w.pod<double>(rec.log_post);
  w.vec(rec.beta);
  w.mat(rec.psi);
  w.vec(rec.tau);
  w.vec(rec.v);
  w.pod<std::int64_t>(static_cast<std::int64_t>(rec.alloc.size()));
  w.raw(rec.alloc.data(), sizeof(std::uint16_t) * rec.alloc.size());
  w.pod<std::int64_t>(static_cast<std::int64_t>(rec.gamma.size()));
  for (const auto& gs : rec.gamma) {
    w.pod<std::int64_t>(static_cast<std::int64_t>(gs.size()));
    for (const auto& g : gs) {
      w.pod<std::int64_t>(static_cast<std::int64_t>(g.bits.size()));
      w.raw(g.bits.data(), g.bits.size());
    }
  }
  w.pod<std::int64_t>(static_cast<std::int64_t>(rec.phi.size()));
  for (const auto& v : rec.phi) w.vec(v);
  w.pod<std::int64_t>(static_cast<std::int64_t>(rec.alpha.size()));
  for (const auto& m : rec.alpha) w.mat(m);
}

SweepRecord read_record(Reader& r) {
  SweepRecord rec;
  rec.sweep = r.pod<std::uint32_t>();
  rec.log_post = r.pod<double>();
  rec.beta = r.vec();
  rec.psi = r.mat();
  rec.tau = r.vec();
  rec.v = r.vec();
  auto n = r.pod<std::int64_t>();
  rec.alloc.resize(static_cast<std::size_t>(n));
  if (!r.raw(rec.alloc.data(), sizeof(std::uint16_t) * rec.alloc.size()))
    throw IoError("draw store truncated");
  auto nk = r.pod<std::int64_t>();
  rec.gamma.resize(static_cast<std::size_t>(nk));
  for (auto& gs : rec.gamma) {
    auto np = r.pod<std::int64_t>();
    gs.resize(static_cast<std::size_t>(np));
    for (auto& g : gs) {
      auto nb = r.pod<std::int64_t>();
      g.bits.resize(static_cast<std::size_t>(nb));
      if (!r.raw(g.bits.data(), g.bits.size())) throw IoError("draw store truncated");
    }
  }
  auto nphi = r.pod<std::int64_t>();
  rec.phi.resize(static_cast<std::size_t>(nphi));
  for (auto& v : rec.phi) v = r.vec();
  auto na = r.pod<std::int64_t>();
  rec.alpha.resize(static_cast<std::size_t>(na));
  for (auto& m : rec.alpha) m = r.mat();
  return rec;
}

}  // namespace

bool StoreDims::compatible(const StoreDims& o) const {
  return n_subjects == o.n_subjects && p == o.p && q == o.q && r == o.r && K == o.K &&
         terms_per_cov == o.terms_per_cov && grid.size() == o.grid.size() && grid == o.grid &&
         config_hash == o.config_hash;
}

struct FileSink::Impl {
  std::FILE* f = nullptr;
};

FileSink::FileSink(const std::string& path, const StoreDims& dims) : impl_(new Impl) {
  if (std::FILE* existing = std::fopen(path.c_str(), "rb")) {
    Reader r(existing);
    bool ok = false;
    try {
      if (r.pod<std::uint32_t>() == kStoreMagic && r.pod<std::uint32_t>() == kStoreVersion)
        ok = read_dims(r).compatible(dims);
    } catch (const IoError&) {
      ok = false;
    }
    std::fclose(existing);
    if (!ok) throw ValidationError("existing draw store is incompatible: " + path);
    impl_->f = std::fopen(path.c_str(), "ab");
    if (!impl_->f) throw IoError("cannot append to draw store: " + path);
    return;
  }
  impl_->f = std::fopen(path.c_str(), "wb");
  if (!impl_->f) throw IoError("cannot create draw store: " + path);
  Writer w(impl_->f);
  w.pod<std::uint32_t>(kStoreMagic);
  w.pod<std::uint32_t>(kStoreVersion);
  write_dims(w, dims);
}

FileSink::~FileSink() { close(); delete impl_; }

void FileSink::close() {
  if (impl_->f) {
    std::fclose(impl_->f);
    impl_->f = nullptr;
  }
}

void FileSink::record(const SweepRecord& rec) {
  if (!impl_->f) throw IoError("draw store already closed");
  Writer w(impl_->f);
  // Byte-size prefix lets readers skip records without decoding them.
  long at = std::ftell(impl_->f);
  w.pod<std::uint64_t>(0);
  write_record(w, rec);
  long end = std::ftell(impl_->f);
  std::uint64_t size = static_cast<std::uint64_t>(end - at - 8);
  std::fseek(impl_->f, at, SEEK_SET);
  w.pod<std::uint64_t>(size);
  std::fseek(impl_->f, end, SEEK_SET);
}

DrawStoreData load_draw_store(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open draw store: " + path);
  DrawStoreData out;
  try {
    Reader r(f);
    if (r.pod<std::uint32_t>() != kStoreMagic) throw IoError("not a draw store: " + path);
    if (r.pod<std::uint32_t>() != kStoreVersion)
      throw IoError("unsupported draw store version: " + path);
    out.dims = read_dims(r);
    for (;;) {
      std::uint64_t size;
      if (!r.raw(&size, sizeof(size))) break;  // clean EOF
      out.records.push_back(read_record(r));
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot create checkpoint: " + path);
  Writer w(f);
  w.pod<std::uint32_t>(kCheckpointMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(cp.config_hash);
  w.pod<std::uint64_t>(cp.chain_seed);
  w.pod<std::uint32_t>(cp.next_sweep);
  const ChainState& s = cp.state;
  w.pod<std::int64_t>(static_cast<std::int64_t>(s.clusters.size()));
  for (const auto& c : s.clusters) {
    w.pod<std::int64_t>(static_cast<std::int64_t>(c.gamma.size()));
    for (const auto& g : c.gamma) {
      w.pod<std::int64_t>(static_cast<std::int64_t>(g.bits.size()));
      w.raw(g.bits.data(), g.bits.size());
    }
    w.vec(c.phi);
    w.pod<double>(c.tau);
  }
  w.vec(s.v);
  w.pod<std::int64_t>(static_cast<std::int64_t>(s.alloc.size()));
  w.raw(s.alloc.data(), sizeof(int) * s.alloc.size());
  w.vec(s.beta);
  w.pod<std::int64_t>(static_cast<std::int64_t>(s.b.size()));
  for (const auto& v : s.b) w.vec(v);
  w.mat(s.psi);
  w.pod<std::int64_t>(static_cast<std::int64_t>(s.latent.size()));
  for (const auto& v : s.latent) w.vec(v);
  if (std::fclose(f) != 0) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open checkpoint: " + path);
  Checkpoint cp;
  try {
    Reader r(f);
    if (r.pod<std::uint32_t>() != kCheckpointMagic) throw IoError("not a checkpoint: " + path);
    if (r.pod<std::uint32_t>() != kCheckpointVersion)
      throw IoError("unsupported checkpoint version: " + path);
    cp.config_hash = r.pod<std::uint64_t>();
    cp.chain_seed = r.pod<std::uint64_t>();
    cp.next_sweep = r.pod<std::uint32_t>();
    ChainState& s = cp.state;
    auto nk = r.pod<std::int64_t>();
    s.clusters.resize(static_cast<std::size_t>(nk));
    for (auto& c : s.clusters) {
      auto np = r.pod<std::int64_t>();
      c.gamma.resize(static_cast<std::size_t>(np));
      for (auto& g : c.gamma) {
        auto nb = r.pod<std::int64_t>();
        g.bits.resize(static_cast<std::size_t>(nb));
        if (!r.raw(g.bits.data(), g.bits.size())) throw IoError("checkpoint truncated");
      }
      c.phi = r.vec();
      c.tau = r.pod<double>();
    }
    s.v = r.vec();
    auto n = r.pod<std::int64_t>();
    s.alloc.resize(static_cast<std::size_t>(n));
    if (!r.raw(s.alloc.data(), sizeof(int) * s.alloc.size())) throw IoError("checkpoint truncated");
    s.beta = r.vec();
    auto nb = r.pod<std::int64_t>();
    s.b.resize(static_cast<std::size_t>(nb));
    for (auto& v : s.b) v = r.vec();
    s.psi = r.mat();
    auto nl = r.pod<std::int64_t>();
    s.latent.resize(static_cast<std::size_t>(nl));
    for (auto& v : s.latent) v = r.vec();
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return cp;
}

}  // namespace fclust
