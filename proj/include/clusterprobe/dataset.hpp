#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clusterprobe/error.hpp"
#include "clusterprobe/matrix.hpp"

namespace clusterprobe {

inline constexpr std::string_view kDatasetVersion = "clusterprobe-dataset-v1";
inline constexpr std::string_view kDatasetDtype = "f32le";
inline constexpr double kUnitNormTolerance = 1e-4;
inline constexpr double kMinRowNorm = 1e-12;

enum class Split { kTrain = 0, kValidation = 1, kTest = 2 };
inline constexpr std::array<Split, 3> kAllSplits = {
    Split::kTrain, Split::kValidation, Split::kTest};

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

// Machine-readable reason attached to every dataset failure.
enum class DatasetErrorCategory {
  kMissingFile,
  kManifest,
  kSizeMismatch,
  kIndexOutOfRange,
  kDuplicateReference,
  kNonFinite,
  kNotNormalized,
  kClusterShape,
  kDegenerateRow,
  kUnknownSplit,
  kIo,
};

std::string_view category_name(DatasetErrorCategory category);

class DatasetError : public Error {
 public:
  DatasetError(DatasetErrorCategory category, const std::string& message)
      : Error("dataset",
              std::string(category_name(category)) + ": " + message),
        category_(category) {}

  DatasetErrorCategory category() const { return category_; }

 private:
  DatasetErrorCategory category_;
};

// One real (parent) image, its N fake children and the N captions that
// produced them. caption_rows[i] generated fake_rows[i]. caption_rows may be
// empty for datasets built from backbones without a text encoder.
struct SemanticCluster {
  std::string cluster_id;
  std::size_t real_row = 0;
  std::vector<std::size_t> fake_rows;
  std::vector<std::size_t> caption_rows;
  // Optional raw caption text, carried through save/load untouched.
  std::vector<std::string> captions;

  std::size_t member_count() const { return fake_rows.size() + 1; }
  bool operator==(const SemanticCluster&) const = default;
};

using SplitClusters = std::array<std::vector<SemanticCluster>, 3>;

// Immutable clustered embedding store. The constructor validates every
// invariant and throws DatasetError on the first violation.
class EmbeddingDataset {
 public:
  EmbeddingDataset(std::size_t dim, MatrixF images, MatrixF texts,
                   SplitClusters splits, bool normalized);

  std::size_t dim() const { return dim_; }
  const MatrixF& images() const { return images_; }
  const MatrixF& texts() const { return texts_; }
  const SplitClusters& splits() const { return splits_; }
  std::span<const SemanticCluster> clusters(Split split) const {
    return splits_[static_cast<std::size_t>(split)];
  }
  bool normalized() const { return normalized_; }
  bool has_captions() const;

  bool operator==(const EmbeddingDataset&) const = default;

 private:
  void validate() const;

  std::size_t dim_;
  MatrixF images_;
  MatrixF texts_;
  SplitClusters splits_;
  bool normalized_;
};

EmbeddingDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const EmbeddingDataset& dataset,
                  const std::filesystem::path& dir);

// Scales every referenced row to unit Euclidean norm and sets the normalized
// flag. Unreferenced rows are left untouched.
EmbeddingDataset l2_normalize(const EmbeddingDataset& dataset);

enum class Authenticity : std::uint8_t { kReal = 0, kFake = 1 };

struct LabeledRow {
  std::size_t image_row;
  Authenticity label;
  bool operator==(const LabeledRow&) const = default;
};

// Each cluster contributes its real row and one uniformly chosen fake, in
// cluster order.
std::vector<LabeledRow> balanced_sample(const EmbeddingDataset& dataset,
                                        Split split, std::uint64_t seed);

// All K*(N+1) image rows of a split with ground truth, cluster by cluster,
// real row first.
std::vector<LabeledRow> split_members(const EmbeddingDataset& dataset,
                                      Split split);

// Gathers image rows into a dense double matrix.
MatrixD gather_image_rows(const EmbeddingDataset& dataset,
                          std::span<const std::size_t> rows);
MatrixD gather_text_rows(const EmbeddingDataset& dataset,
                         std::span<const std::size_t> rows);

}  // namespace clusterprobe
