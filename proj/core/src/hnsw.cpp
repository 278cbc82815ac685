#include "deltastore/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "deltastore/errors.hpp"
#include "deltastore/io.hpp"

namespace deltastore {

namespace {

constexpr char kMagic[4] = {'N', 'S', 'I', 'X'};
constexpr uint16_t kVersion = 1;
constexpr int kMaxLevel = 30;

// FNV-1a over the serialized body; makes every byte of the file, including
// otherwise inert header fields, corruption-detectable.
uint32_t body_checksum(std::span<const uint8_t> body) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : body) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return static_cast<uint32_t>(h ^ (h >> 32));
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct FartherFirst {
  bool operator()(const HnswIndex::Hit& a, const HnswIndex::Hit& b) const {
    return a.distance < b.distance;
  }
};
struct CloserFirst {
  bool operator()(const HnswIndex::Hit& a, const HnswIndex::Hit& b) const {
    return a.distance > b.distance;
  }
};

}  // namespace

HnswIndex::HnswIndex(uint64_t pool_key, HnswConfig config)
    : pool_key_(pool_key),
      config_(config),
      level_factor_(1.0 / std::log(static_cast<double>(std::max(2u, config.M)))),
      rng_state_(0x5eed0000u ^ pool_key) {}

double quantized_l2_distance(std::span<const double> query,
                             const QuantizedBase& vertex) {
  const double s = vertex.params.scale;
  const double lo = vertex.params.delta_min;
  const uint8_t* codes = vertex.codes.data();
  double sum = 0.0;
  for (size_t i = 0; i < query.size(); ++i) {
    const double x =
        static_cast<double>(static_cast<float>(lo + codes[i] * s));
    const double d = query[i] - x;
    sum += d * d;
  }
  return sum;
}

double HnswIndex::dist_to_query(std::span<const double> query,
                                const Vertex& v) const {
  return quantized_l2_distance(query, v.qb);
}

double HnswIndex::dist_between(const Vertex& a, const Vertex& b) const {
  const double sa = a.qb.params.scale, la = a.qb.params.delta_min;
  const double sb = b.qb.params.scale, lb = b.qb.params.delta_min;
  const uint8_t* ca = a.qb.codes.data();
  const uint8_t* cb = b.qb.codes.data();
  double sum = 0.0;
  for (size_t i = 0; i < a.qb.codes.size(); ++i) {
    const double xa = static_cast<double>(static_cast<float>(la + ca[i] * sa));
    const double xb = static_cast<double>(static_cast<float>(lb + cb[i] * sb));
    const double d = xa - xb;
    sum += d * d;
  }
  return sum;
}

int HnswIndex::random_level() {
  const double u =
      (static_cast<double>(splitmix64(rng_state_) >> 11) + 1.0) * 0x1p-53;
  const int level = static_cast<int>(-std::log(u) * level_factor_);
  return std::min(level, kMaxLevel);
}

uint64_t HnswIndex::greedy_descend(std::span<const double> query,
                                   uint64_t entry, int level) const {
  uint64_t cur = entry;
  double best = dist_to_query(query, vertices_[cur]);
  bool improved = true;
  while (improved) {
    improved = false;
    const Vertex& v = vertices_[cur];
    if (level >= static_cast<int>(v.links.size())) break;
    for (uint64_t nb : v.links[level]) {
      const double d = dist_to_query(query, vertices_[nb]);
      if (d < best) {
        best = d;
        cur = nb;
        improved = true;
      }
    }
  }
  return cur;
}

std::vector<HnswIndex::Hit> HnswIndex::search_layer(
    std::span<const double> query, uint64_t entry, size_t ef,
    int level) const {
  std::unordered_set<uint64_t> visited{entry};
  std::priority_queue<Hit, std::vector<Hit>, CloserFirst> candidates;
  std::priority_queue<Hit, std::vector<Hit>, FartherFirst> results;

  const double d0 = dist_to_query(query, vertices_[entry]);
  candidates.push({entry, d0});
  results.push({entry, d0});

  while (!candidates.empty()) {
    const Hit cur = candidates.top();
    candidates.pop();
    if (cur.distance > results.top().distance && results.size() >= ef) break;

    const Vertex& v = vertices_[cur.vertex_id];
    if (level >= static_cast<int>(v.links.size())) continue;
    for (uint64_t nb : v.links[level]) {
      if (!visited.insert(nb).second) continue;
      const double d = dist_to_query(query, vertices_[nb]);
      if (results.size() < ef || d < results.top().distance) {
        candidates.push({nb, d});
        results.push({nb, d});
        if (results.size() > ef) results.pop();
      }
    }
  }

  std::vector<Hit> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());  // closest first
  return out;
}

std::vector<uint64_t> HnswIndex::select_neighbors(
    const std::vector<Hit>& candidates, size_t m) const {
  std::vector<uint64_t> kept;
  kept.reserve(m);
  for (const Hit& c : candidates) {
    if (kept.size() >= m) break;
    bool closer_to_kept = false;
    for (uint64_t k : kept) {
      if (dist_between(vertices_[c.vertex_id], vertices_[k]) < c.distance) {
        closer_to_kept = true;
        break;
      }
    }
    if (!closer_to_kept) kept.push_back(c.vertex_id);
  }
  // Backfill with nearest skipped candidates, as hnswlib does, so sparse
  // regions still reach M links.
  if (kept.size() < m) {
    for (const Hit& c : candidates) {
      if (kept.size() >= m) break;
      if (std::find(kept.begin(), kept.end(), c.vertex_id) == kept.end()) {
        kept.push_back(c.vertex_id);
      }
    }
  }
  return kept;
}

void HnswIndex::prune_links(uint64_t id, int level, size_t cap) {
  Vertex& v = vertices_[id];
  auto& links = v.links[level];
  if (links.size() <= cap) return;
  std::vector<Hit> scored;
  scored.reserve(links.size());
  for (uint64_t nb : links) {
    scored.push_back({nb, dist_between(v, vertices_[nb])});
  }
  std::sort(scored.begin(), scored.end(),
            [](const Hit& a, const Hit& b) { return a.distance < b.distance; });
  links = select_neighbors(scored, cap);
}

uint64_t HnswIndex::insert(QuantizedBase qb) {
  if (qb.elem_count() != pool_key_) {
    throw ShapeMismatch("vertex element count does not match pool key");
  }
  const uint64_t id = vertices_.size();
  const int level = random_level();
  Vertex v;
  v.qb = std::move(qb);
  v.level = level;
  v.links.resize(static_cast<size_t>(level) + 1);
  vertices_.push_back(std::move(v));

  if (id == 0) {
    entry_point_ = 0;
    max_level_ = level;
    return id;
  }

  const std::vector<double> query = dequantize_base_f64(vertices_[id].qb);
  uint64_t cur = entry_point_;
  for (int l = max_level_; l > level; --l) {
    cur = greedy_descend(query, cur, l);
  }
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    std::vector<Hit> candidates =
        search_layer(query, cur, config_.ef_construction, l);
    std::vector<uint64_t> neighbors =
        select_neighbors(candidates, config_.M);
    for (uint64_t nb : neighbors) {
      vertices_[id].links[l].push_back(nb);
      vertices_[nb].links[l].push_back(id);
      prune_links(nb, l, level_cap(l));
    }
    if (!candidates.empty()) cur = candidates.front().vertex_id;
  }
  if (level > max_level_) {
    entry_point_ = id;
    max_level_ = level;
  }
  return id;
}

std::optional<HnswIndex::Hit> HnswIndex::search(
    std::span<const double> query) const {
  if (vertices_.empty()) return std::nullopt;
  if (query.size() != pool_key_) {
    throw ShapeMismatch("query element count does not match pool key");
  }
  uint64_t cur = entry_point_;
  for (int l = max_level_; l > 0; --l) {
    cur = greedy_descend(query, cur, l);
  }
  const size_t ef = std::max<size_t>(config_.ef_search, 1);
  std::vector<Hit> results = search_layer(query, cur, ef, 0);
  return results.front();
}

const QuantizedBase* HnswIndex::find_vertex(uint64_t id) const {
  if (id >= vertices_.size()) return nullptr;
  return &vertices_[id].qb;
}

size_t HnswIndex::vertex_storage_bytes(uint64_t id) const {
  if (id >= vertices_.size()) return 0;
  const Vertex& v = vertices_[id];
  size_t bytes = v.qb.codes.size() + 2 * sizeof(double) + sizeof(uint32_t);
  for (const auto& links : v.links) {
    bytes += sizeof(uint32_t) + links.size() * sizeof(uint64_t);
  }
  return bytes;
}

size_t HnswIndex::resident_bytes() const {
  size_t bytes = sizeof(HnswIndex);
  for (uint64_t id = 0; id < vertices_.size(); ++id) {
    bytes += vertex_storage_bytes(id) + sizeof(Vertex);
  }
  return bytes;
}

std::vector<uint8_t> HnswIndex::serialize() const {
  ByteWriter w;
  w.u64(pool_key_);
  w.u32(config_.M);
  w.u32(config_.ef_construction);
  w.u32(config_.ef_search);
  w.u64(rng_state_);
  w.u64(entry_point_);
  w.u32(static_cast<uint32_t>(max_level_));
  w.u64(vertices_.size());
  for (const Vertex& v : vertices_) {
    w.u32(static_cast<uint32_t>(v.level));
    w.f64(v.qb.params.scale);
    w.f64(v.qb.params.delta_min);
    w.bytes(v.qb.codes);
  }
  for (const Vertex& v : vertices_) {
    for (const auto& links : v.links) {
      w.u32(static_cast<uint32_t>(links.size()));
      for (uint64_t nb : links) w.u64(nb);
    }
  }
  const std::vector<uint8_t> body = w.take();

  ByteWriter out;
  out.bytes(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(kMagic), sizeof(kMagic)));
  out.u16(kVersion);
  out.u32(body_checksum(body));
  out.bytes(body);
  return out.take();
}

HnswIndex HnswIndex::deserialize(std::span<const uint8_t> bytes) {
  ByteReader header(bytes);
  const std::vector<uint8_t> magic = header.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw CorruptStore("bad index magic");
  }
  const uint16_t version = header.u16();
  if (version != kVersion) {
    throw UnsupportedVersion("index version " + std::to_string(version) +
                             " is not supported");
  }
  const uint32_t stored_sum = header.u32();
  const std::span<const uint8_t> body = bytes.subspan(header.pos());
  if (body_checksum(body) != stored_sum) {
    throw CorruptStore("index checksum mismatch");
  }
  ByteReader r(body);
  const uint64_t pool_key = r.u64();
  if (pool_key == 0) throw CorruptStore("index pool key is zero");
  HnswConfig cfg;
  cfg.M = r.u32();
  cfg.ef_construction = r.u32();
  cfg.ef_search = r.u32();
  if (cfg.M == 0 || cfg.M > 1024 || cfg.ef_construction == 0 ||
      cfg.ef_search == 0) {
    throw CorruptStore("index config out of range");
  }
  HnswIndex idx(pool_key, cfg);
  idx.rng_state_ = r.u64();
  idx.entry_point_ = r.u64();
  idx.max_level_ = static_cast<int>(r.u32());
  if (idx.max_level_ < 0 || idx.max_level_ > kMaxLevel) {
    throw CorruptStore("index max level out of range");
  }
  const uint64_t count = r.u64();
  // Each vertex needs at least its codes plus fixed fields.
  if (count > 0 && (r.remaining() / count) < (pool_key + 20)) {
    throw CorruptStore("vertex table exceeds file size");
  }
  idx.vertices_.resize(count);
  for (Vertex& v : idx.vertices_) {
    v.level = static_cast<int>(r.u32());
    if (v.level < 0 || v.level > kMaxLevel || v.level > idx.max_level_) {
      throw CorruptStore("vertex level out of range");
    }
    v.qb.params.scale = r.f64();
    v.qb.params.delta_min = r.f64();
    if (!(v.qb.params.scale > 0.0) || !std::isfinite(v.qb.params.scale) ||
        !std::isfinite(v.qb.params.delta_min)) {
      throw CorruptStore("vertex quantization params out of range");
    }
    v.qb.codes = r.bytes(pool_key);
    v.links.resize(static_cast<size_t>(v.level) + 1);
  }
  for (Vertex& v : idx.vertices_) {
    for (auto& links : v.links) {
      const uint32_t n = r.u32();
      if (n > 16 * std::max(1u, cfg.M)) {
        throw CorruptStore("adjacency list too long");
      }
      links.resize(n);
      for (uint64_t& nb : links) {
        nb = r.u64();
        if (nb >= count) throw CorruptStore("neighbor id out of range");
      }
    }
  }
  if (!r.exhausted()) throw CorruptStore("trailing bytes in index file");
  if (count == 0) {
    if (idx.entry_point_ != BaseRef::kNone) {
      throw CorruptStore("entry point set in empty index");
    }
  } else {
    if (idx.entry_point_ >= count) throw CorruptStore("entry point out of range");
    if (idx.vertices_[idx.entry_point_].level != idx.max_level_) {
      throw CorruptStore("entry point level does not match max level");
    }
  }
  return idx;
}

}  // namespace deltastore
