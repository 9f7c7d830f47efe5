#pragma once

// Labeled per-layer sentence embeddings and their on-disk container.
//
// SPEB layout (little-endian throughout):
//
//   "SPEB"                      4 bytes magic
//   version                     u32 (= 1)
//   L                           u32 number of layers
//   d                           u32 vector dimension
//   K                           u32 number of classes
//   K x label name              u16 byte length + UTF-8 bytes
//   record count                u64
//   per record:
//     id                        u16 byte length + UTF-8 bytes
//     label                     u32 class index
//     values                    L*d float32, layer-major
//
// Files ending in ".jsonl" are read as a debug format instead: an optional
// first line {"labels": [...]} fixing the class order, then one object per
// record {"id": ..., "label": <name>, "layers": [[...], ...]}.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace socioprobe {

/// Raised for malformed container contents; carries the byte offset (or, for
/// the JSON-lines format, the 1-based line number) where reading failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

struct LabelSchema {
  std::vector<std::string> class_names;

  std::size_t num_classes() const { return class_names.size(); }
  std::optional<std::uint32_t> index_of(std::string_view name) const;
  /// Throws std::invalid_argument unless names are unique, non-empty and K >= 2.
  void validate() const;

  bool operator==(const LabelSchema&) const = default;
};

struct EmbeddingRecord {
  std::string id;
  std::uint32_t label = 0;
  std::vector<float> values;  // L*d, layer-major

  /// 1-based layer index.
  std::span<const float> layer(std::size_t layer, std::size_t dim) const {
    return std::span<const float>(values).subspan((layer - 1) * dim, dim);
  }

  bool operator==(const EmbeddingRecord&) const = default;
};

struct EmbeddingDataset {
  LabelSchema schema;
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  /// Same schema and shape, no records.
  EmbeddingDataset empty_like() const;
  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  bool operator==(const EmbeddingDataset&) const = default;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplit {
  EmbeddingDataset train;
  EmbeddingDataset val;
  EmbeddingDataset test;
};

EmbeddingDataset read_dataset(const std::filesystem::path& path);
void write_dataset(const EmbeddingDataset& dataset,
                   const std::filesystem::path& path);
/// Writes the JSON-lines debug format (with the labels header line).
void write_dataset_jsonl(const EmbeddingDataset& dataset,
                         const std::filesystem::path& path);

/// In-memory SPEB codec used by the file functions.
std::vector<std::uint8_t> encode_speb(const EmbeddingDataset& dataset);
EmbeddingDataset decode_speb(std::span<const std::uint8_t> bytes);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Record indices of each part for a dataset of n records; see split_dataset.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

/// Partitions the records after a Fisher-Yates permutation seeded by
/// spec.seed. Validation and test sizes are round(n * fraction); the
/// remainder goes to training. Parts keep permutation order.
DatasetSplit split_dataset(const EmbeddingDataset& dataset,
                           const SplitSpec& spec);

/// Uniform sample of n records without replacement. Selected records keep
/// their original relative order.
EmbeddingDataset subsample(const EmbeddingDataset& dataset, std::size_t n,
                           std::uint64_t seed);

enum class AgeClass : std::uint32_t { kYoung = 0, kOld = 1 };

/// Age binning for the review-author age task: under 35 is young, over 45
/// is old, and 35..45 inclusive is excluded (nullopt).
std::optional<AgeClass> bin_age(int age);

/// Names for the two age classes, in class-index order.
LabelSchema age_schema();

}  // namespace socioprobe
