#pragma once

// Map entries and the descriptor k-NN index, plus the KMAP file format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "floorloc/descriptor.hpp"
#include "floorloc/geometry.hpp"

namespace floorloc {

struct MapEntry {
  std::uint64_t entry_id = 0;
  Vec2 world_pos;
  std::uint32_t member_count = 0;
  Descriptor descriptor{};

  friend bool operator==(const MapEntry&, const MapEntry&) = default;
};

struct Match {
  std::uint32_t query_keypoint_idx = 0;
  std::uint64_t entry_id = 0;
  double cosine_distance = 0.0;
};

enum class SearchMode { exact, approx };

struct IndexParams {
  // The approximate path probes enough inverted lists to reach this mean
  // recall@k on self-queries sampled from the entries.
  double target_recall = 0.97;
  std::size_t recall_k = 20;
  std::size_t recall_queries = 200;
  // Below this many entries the index is a single list (exact scan).
  std::size_t min_entries_for_lists = 512;
  std::size_t kmeans_iterations = 12;
  std::uint64_t seed = 7;
};

struct IndexInfo {
  std::size_t n_lists = 1;
  std::size_t n_probe = 1;
  double self_recall = 1.0;  // measured at build time
};

inline constexpr std::uint32_t kMapFormatVersion = 1;

/// Immutable after construction; concurrent queries are safe.
class MapDatabase {
 public:
  MapDatabase() = default;

  /// Entries must be non-empty with unique ids; they are stored sorted by id.
  static MapDatabase build(std::vector<MapEntry> entries, const IndexParams& params = {});

  /// Up to k matches in ascending cosine distance, ties by entry_id.
  std::vector<Match> query(const Descriptor& q, std::size_t k, SearchMode mode,
                           std::uint32_t query_keypoint_idx = 0) const;

  std::span<const MapEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const MapEntry* find(std::uint64_t entry_id) const;
  const IndexInfo& index_info() const { return info_; }

  void save(const std::filesystem::path& path) const;
  static MapDatabase load(const std::filesystem::path& path, const IndexParams& params = {});

 private:
  void build_index(const IndexParams& params);
  void exact_candidates(const float* q, std::vector<Match>& out, std::size_t k) const;
  void approx_candidates(const float* q, std::vector<Match>& out, std::size_t k) const;

  std::vector<MapEntry> entries_;
  std::vector<float> rows_;  // entries' descriptors padded to kRowFloats

  // Inverted lists: list l holds entries list_members_[list_start_[l] ..
  // list_start_[l+1]) with their rows copied contiguously into list_rows_.
  std::vector<float> centroids_;
  std::vector<std::uint32_t> list_start_;
  std::vector<std::uint32_t> list_members_;
  std::vector<float> list_rows_;
  IndexInfo info_;
};

/// Fraction of the exact top-k ids found by the approximate top-k, averaged.
double recall_at_k(const MapDatabase& db, std::span<const Descriptor> queries, std::size_t k);

}  // namespace floorloc
