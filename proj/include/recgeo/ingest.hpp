#pragma once

#include "recgeo/embedding_matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace recgeo {

struct UserSequence {
  std::int64_t user_id = 0;
  std::vector<ItemId> items;

  friend bool operator==(const UserSequence&, const UserSequence&) = default;
};

/// Time-ordered item sequences, one per user, sorted by user id.
struct InteractionLog {
  std::vector<UserSequence> sequences;
  Index num_items = 0;

  /// Throws ValidationError on out-of-range ids, empty sequences or duplicate users.
  void validate() const;

  std::size_t num_interactions() const;

  friend bool operator==(const InteractionLog&, const InteractionLog&) = default;
};

/// Parses `user<TAB>item<TAB>timestamp` lines. Ids may carry a non-numeric
/// prefix ("u12", "i7"). Blank lines and lines starting with '#' are skipped.
/// Sequences are sorted by timestamp with ties kept in input order.
InteractionLog parse_interactions(std::istream& in);
InteractionLog load_interactions(const std::filesystem::path& path);

/// Writes `u<user>\ti<item>\t<position>` lines; parse_interactions reads them back.
void write_interactions(const InteractionLog& log, std::ostream& out);
void save_interactions(const InteractionLog& log, const std::filesystem::path& path);

/// Drops items, then users, with fewer than `min_count` interactions.
/// Item ids are not remapped so num_items is unchanged.
InteractionLog filter_min_count(const InteractionLog& log, std::size_t min_count);

// EMB1 binary format: "EMB1", u64 rows, u64 cols (little endian), then
// rows*cols little-endian float32 values in row-major order.
inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kEmbeddingHeaderBytes = 4 + 8 + 8;

EmbeddingMatrix read_embeddings(std::istream& in);
void write_embeddings(const EmbeddingMatrix& matrix, std::ostream& out);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

/// One row per item, comma separated, shortest round-trip decimal form.
void write_embeddings_csv(const EmbeddingMatrix& matrix, std::ostream& out);

struct SynthConfig {
  Index num_items = 500;
  Index num_users = 200;
  Index num_clusters = 10;
  Index seq_len_min = 8;
  Index seq_len_max = 24;
  Index embed_dim = 64;
  double norm_scale_sigma = 1.0;
  // Trailing dimensions carrying structure unrelated to the behavioural clusters.
  Index distractor_dims = 32;
  double jump_prob = 0.05;
  std::uint64_t seed = 0;

  // Std of per-item noise around the cluster center (center has unit norm).
  double cluster_spread = 0.6;
  // Distractor items are grouped into this many topics that cut across
  // clusters; 0 makes the distractor block plain isotropic noise.
  Index distractor_topics = 8;
  double distractor_scale = 3.0;

  void validate() const;
};

struct SyntheticData {
  InteractionLog log;
  EmbeddingMatrix embeddings;
  std::vector<Index> cluster_of;  // cluster label per item
};

/// Deterministic for a given config (including seed).
SyntheticData generate_synthetic(const SynthConfig& cfg);

}  // namespace recgeo
