#include "floorloc/mapdb.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "floorloc/errors.hpp"
#include "floorloc/simd/kernels.hpp"

namespace floorloc {
namespace {

constexpr std::size_t kRow = simd::kRowFloats;
static_assert(kDescriptorDim <= kRow);

void pad_row(const Descriptor& d, float* row) {
  std::copy(d.begin(), d.end(), row);
  std::fill(row + kDescriptorDim, row + kRow, 0.0f);
}

bool match_less(const Match& a, const Match& b) {
  if (a.cosine_distance != b.cosine_distance) return a.cosine_distance < b.cosine_distance;
  return a.entry_id < b.entry_id;
}

void keep_top_k(std::vector<Match>& m, std::size_t k) {
  if (m.size() > k) {
    std::nth_element(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(k - 1), m.end(),
                     match_less);
    m.resize(k);
  }
  std::sort(m.begin(), m.end(), match_less);
}

}  // namespace

MapDatabase MapDatabase::build(std::vector<MapEntry> entries, const IndexParams& params) {
  if (entries.empty()) throw std::invalid_argument("map database: no entries");
  std::sort(entries.begin(), entries.end(),
            [](const MapEntry& a, const MapEntry& b) { return a.entry_id < b.entry_id; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].entry_id == entries[i - 1].entry_id) {
      throw std::invalid_argument("map database: duplicate entry id " +
                                  std::to_string(entries[i].entry_id));
    }
  }
  MapDatabase db;
  db.entries_ = std::move(entries);
  db.rows_.resize(db.entries_.size() * kRow);
  for (std::size_t i = 0; i < db.entries_.size(); ++i) {
    pad_row(db.entries_[i].descriptor, db.rows_.data() + i * kRow);
  }
  db.build_index(params);
  return db;
}

const MapEntry* MapDatabase::find(std::uint64_t entry_id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), entry_id,
                             [](const MapEntry& e, std::uint64_t id) { return e.entry_id < id; });
  return it != entries_.end() && it->entry_id == entry_id ? &*it : nullptr;
}

void MapDatabase::build_index(const IndexParams& params) {
  const std::size_t n = entries_.size();
  const auto& kern = simd::active();
  std::size_t n_lists = 1;
  if (n >= params.min_entries_for_lists) {
    n_lists = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(n))));
  }

  // Spherical k-means seeded from distinct random entries.
  std::mt19937_64 rng(params.seed);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t i = 0; i < n_lists; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  centroids_.assign(n_lists * kRow, 0.0f);
  for (std::size_t l = 0; l < n_lists; ++l) {
    std::copy_n(rows_.data() + static_cast<std::size_t>(order[l]) * kRow, kRow,
                centroids_.data() + l * kRow);
  }

  std::vector<std::uint32_t> assign(n, 0);
  std::vector<float> dots(n_lists);
  auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      kern.dot_rows(rows_.data() + i * kRow, centroids_.data(), n_lists, dots.data());
      std::size_t best = 0;
      for (std::size_t l = 1; l < n_lists; ++l) {
        if (dots[l] > dots[best]) best = l;
      }
      assign[i] = static_cast<std::uint32_t>(best);
    }
  };
  if (n_lists > 1) {
    for (std::size_t it = 0; it < params.kmeans_iterations; ++it) {
      assign_all();
      std::vector<double> sums(n_lists * kDescriptorDim, 0.0);
      std::vector<std::size_t> counts(n_lists, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++counts[assign[i]];
        for (std::size_t d = 0; d < kDescriptorDim; ++d) {
          sums[assign[i] * kDescriptorDim + d] += entries_[i].descriptor[d];
        }
      }
      for (std::size_t l = 0; l < n_lists; ++l) {
        if (counts[l] == 0) continue;
        double sq = 0.0;
        for (std::size_t d = 0; d < kDescriptorDim; ++d) {
          sq += sums[l * kDescriptorDim + d] * sums[l * kDescriptorDim + d];
        }
        if (!(sq > 0.0)) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t d = 0; d < kDescriptorDim; ++d) {
          centroids_[l * kRow + d] = static_cast<float>(sums[l * kDescriptorDim + d] * inv);
        }
      }
    }
  }
  assign_all();

  list_start_.assign(n_lists + 1, 0);
  for (std::size_t i = 0; i < n; ++i) ++list_start_[assign[i] + 1];
  for (std::size_t l = 0; l < n_lists; ++l) list_start_[l + 1] += list_start_[l];
  list_members_.resize(n);
  list_rows_.resize(n * kRow);
  std::vector<std::uint32_t> fill(list_start_.begin(), list_start_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t slot = fill[assign[i]]++;
    list_members_[slot] = static_cast<std::uint32_t>(i);
    std::copy_n(rows_.data() + i * kRow, kRow, list_rows_.data() + std::size_t{slot} * kRow);
  }

  info_ = IndexInfo{n_lists, n_lists, 1.0};
  if (n_lists == 1) return;

  // Smallest probe count meeting the recall target; recall grows with probes.
  const std::size_t n_queries = std::min(params.recall_queries, n);
  for (std::size_t i = 0; i < n_queries; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<Descriptor> queries(n_queries);
  for (std::size_t i = 0; i < n_queries; ++i) queries[i] = entries_[order[i]].descriptor;

  std::size_t lo = 1;
  std::size_t hi = n_lists;
  double hi_recall = 1.0;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    info_.n_probe = mid;
    const double r = recall_at_k(*this, queries, params.recall_k);
    if (r >= params.target_recall) {
      hi = mid;
      hi_recall = r;
    } else {
      lo = mid + 1;
    }
  }
  info_.n_probe = hi;
  info_.self_recall = hi == n_lists ? recall_at_k(*this, queries, params.recall_k) : hi_recall;
}

void MapDatabase::exact_candidates(const float* q, std::vector<Match>& out,
                                   std::size_t k) const {
  const std::size_t n = entries_.size();
  std::vector<float> dots(n);
  simd::active().dot_rows(q, rows_.data(), n, dots.data());
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].entry_id = entries_[i].entry_id;
    out[i].cosine_distance = 1.0 - static_cast<double>(dots[i]);
  }
  keep_top_k(out, k);
}

void MapDatabase::approx_candidates(const float* q, std::vector<Match>& out,
                                    std::size_t k) const {
  const auto& kern = simd::active();
  const std::size_t n_lists = info_.n_lists;
  std::vector<float> cd(n_lists);
  kern.dot_rows(q, centroids_.data(), n_lists, cd.data());
  std::vector<std::uint32_t> lists(n_lists);
  std::iota(lists.begin(), lists.end(), 0u);
  const std::size_t probe = std::min(info_.n_probe, n_lists);
  std::partial_sort(lists.begin(), lists.begin() + static_cast<std::ptrdiff_t>(probe), lists.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return cd[a] != cd[b] ? cd[a] > cd[b] : a < b;
                    });
  out.clear();
  std::vector<float> dots;
  for (std::size_t p = 0; p < probe; ++p) {
    const std::uint32_t l = lists[p];
    const std::size_t begin = list_start_[l];
    const std::size_t count = list_start_[l + 1] - begin;
    dots.resize(count);
    kern.dot_rows(q, list_rows_.data() + begin * kRow, count, dots.data());
    for (std::size_t j = 0; j < count; ++j) {
      out.push_back({0, entries_[list_members_[begin + j]].entry_id,
                     1.0 - static_cast<double>(dots[j])});
    }
  }
  keep_top_k(out, k);
}

std::vector<Match> MapDatabase::query(const Descriptor& q, std::size_t k, SearchMode mode,
                                      std::uint32_t query_keypoint_idx) const {
  std::vector<Match> out;
  if (entries_.empty() || k == 0) return out;
  alignas(32) float row[kRow];
  pad_row(q, row);
  if (mode == SearchMode::exact || info_.n_lists == 1) {
    exact_candidates(row, out, k);
  } else {
    approx_candidates(row, out, k);
  }
  for (Match& m : out) m.query_keypoint_idx = query_keypoint_idx;
  return out;
}

double recall_at_k(const MapDatabase& db, std::span<const Descriptor> queries, std::size_t k) {
  if (queries.empty()) return 1.0;
  double total = 0.0;
  for (const Descriptor& q : queries) {
    const auto exact = db.query(q, k, SearchMode::exact);
    const auto approx = db.query(q, k, SearchMode::approx);
    std::vector<std::uint64_t> a, b;
    for (const Match& m : exact) a.push_back(m.entry_id);
    for (const Match& m : approx) b.push_back(m.entry_id);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::uint64_t> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    total += a.empty() ? 1.0 : static_cast<double>(common.size()) / a.size();
  }
  return total / static_cast<double>(queries.size());
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in native little-endian order");

constexpr char kMagic[4] = {'K', 'M', 'A', 'P'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;
constexpr std::size_t kEntryBytes = 8 + 8 + 8 + 4 + 4 * kDescriptorDim;

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc_of(const std::string& buf, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(n)));
}

}  // namespace

void MapDatabase::save(const std::filesystem::path& path) const {
  std::string buf(kMagic, 4);
  put(buf, kMapFormatVersion);
  put(buf, static_cast<std::uint64_t>(entries_.size()));
  for (const MapEntry& e : entries_) {
    put(buf, e.entry_id);
    put(buf, e.world_pos.x);
    put(buf, e.world_pos.y);
    put(buf, e.member_count);
    for (float f : e.descriptor) put(buf, f);
  }
  put(buf, crc_of(buf, buf.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(path, "write failed");
}

MapDatabase MapDatabase::load(const std::filesystem::path& path, const IndexParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  const std::string where = ": " + path.string();

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, "not a map file" + where);
  }
  if (buf.size() < 8) throw FormatError(FormatError::Kind::truncated, "truncated map file" + where);
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(buf, pos);
  if (version != kMapFormatVersion) {
    throw FormatError(FormatError::Kind::unsupported_version,
                      "unsupported map file version " + std::to_string(version) + where);
  }
  if (buf.size() < kHeaderBytes) {
    throw FormatError(FormatError::Kind::truncated, "truncated map file" + where);
  }
  const auto count = get<std::uint64_t>(buf, pos);
  const std::size_t body = buf.size() - kHeaderBytes;
  if (body < 4 || (body - 4) / kEntryBytes < count) {
    throw FormatError(FormatError::Kind::truncated, "truncated map file" + where);
  }
  const std::size_t expected = kHeaderBytes + count * kEntryBytes + 4;
  if (buf.size() != expected) {
    throw FormatError(FormatError::Kind::malformed, "trailing bytes in map file" + where);
  }
  std::size_t crc_pos = expected - 4;
  if (get<std::uint32_t>(buf, crc_pos) != crc_of(buf, expected - 4)) {
    throw FormatError(FormatError::Kind::checksum_mismatch, "map file checksum mismatch" + where);
  }
  std::vector<MapEntry> entries(count);
  for (MapEntry& e : entries) {
    e.entry_id = get<std::uint64_t>(buf, pos);
    e.world_pos.x = get<double>(buf, pos);
    e.world_pos.y = get<double>(buf, pos);
    e.member_count = get<std::uint32_t>(buf, pos);
    for (float& f : e.descriptor) f = get<float>(buf, pos);
  }
  if (entries.empty()) throw FormatError(FormatError::Kind::malformed, "empty map file" + where);
  try {
    return build(std::move(entries), params);
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatError::Kind::malformed, e.what() + where);
  }
}

}  // namespace floorloc
