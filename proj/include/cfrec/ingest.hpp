#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfrec/ratings.hpp"

namespace cfrec {

/// Dense index space over arbitrary string ids, in first-seen order.
class IdMap {
 public:
  std::uint32_t intern(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
  }
  const std::uint32_t* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &it->second;
  }
  const std::string& id(std::uint32_t index) const { return ids_[index]; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> ids_;
};

enum class FileFormat : std::uint8_t {
  kMovieLensDat,  // `::`-separated
  kMovieLensCsv,  // comma-separated, optional header, quoted fields
  kCanonical,     // tab-separated
};

FileFormat format_from_name(const std::string& name);        // "dat" | "csv" | "canonical"
std::optional<FileFormat> guess_format(const std::string& path);  // by extension

/// Sparse per-item tag occurrence counts.
struct TagMatrix {
  std::size_t n_entities = 0;
  IdMap tags;
  // Per entity: (tag index, count), sorted by tag index.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> rows;

  std::size_t n_tags() const { return tags.size(); }
};

/// Binary entity x category indicators (movie genres and the like).
struct CategoryMatrix {
  std::size_t n_entities = 0;
  IdMap categories;
  std::vector<std::vector<std::uint32_t>> rows;  // sorted category indices per entity

  std::size_t n_categories() const { return categories.size(); }
};

/// Per-user demographic columns from MovieLens-1M style user files.
struct Demographics {
  std::size_t n_users = 0;
  CategoryMatrix gender;
  CategoryMatrix occupation;
  std::vector<double> age;       // raw years; encoded later
  std::vector<bool> age_known;
};

struct RatingsData {
  SparseRatings ratings;  // user rows, original units (not normalized)
  RatingScale scale;
  IdMap users;
  IdMap items;
};

/// Parses a rating file into user-row sparse storage with dense index maps.
/// When no scale is given it is inferred: [1, 5] if all values are whole
/// stars at least 1, [0.5, 5] when half-star values are present.
RatingsData parse_ratings(const std::string& path, FileFormat format,
                          std::optional<RatingScale> scale = std::nullopt);

/// Tag counts per item, tags lower-cased and trimmed before counting.
/// Items unseen in `items` are added with a warning.
TagMatrix parse_tags(const std::string& path, FileFormat format, IdMap& items);

/// Pipe-separated category lists per item (MovieLens genre convention).
CategoryMatrix parse_categories(const std::string& path, FileFormat format, IdMap& items);

/// MovieLens-1M style user records: id::gender::age::occupation[::zip].
Demographics parse_demographics(const std::string& path, FileFormat format, IdMap& users);

/// Canonical TSV: `row_id<TAB>col_id<TAB>rating` in original units, six
/// decimal places. Values are denormalized through `scale` on write.
void write_canonical_ratings(const std::string& path, const SparseRatings& normalized,
                             const RatingScale& scale, const IdMap& row_ids,
                             const IdMap& col_ids);

/// Sidecar `entity<TAB>index` map emitted alongside splits and models.
void write_id_map(const std::string& path, const IdMap& map);
IdMap read_id_map(const std::string& path);

}  // namespace cfrec
