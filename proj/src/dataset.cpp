#include "clusterprobe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "clusterprobe/binary_io.hpp"
#include "clusterprobe/random.hpp"

namespace clusterprobe {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kManifestName = "manifest.json";
constexpr std::string_view kImageFile = "images.f32";
constexpr std::string_view kTextFile = "texts.f32";

[[noreturn]] void fail(DatasetErrorCategory category, const std::string& msg) {
  throw DatasetError(category, msg);
}

double row_norm(std::span<const float> row) {
  double acc = 0.0;
  for (float v : row) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

void check_finite(const MatrixF& m, std::string_view which) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (float v : m.row(r)) {
      if (!std::isfinite(v)) {
        fail(DatasetErrorCategory::kNonFinite,
             std::string(which) + " row " + std::to_string(r) +
                 " contains a non-finite value");
      }
    }
  }
}

template <typename Fn>
void for_each_cluster(const SplitClusters& splits, Fn&& fn) {
  for (Split split : kAllSplits) {
    for (const auto& cluster : splits[static_cast<std::size_t>(split)]) {
      fn(split, cluster);
    }
  }
}

MatrixF read_matrix(const std::filesystem::path& path, std::size_t dim) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(DatasetErrorCategory::kMissingFile, "missing file " + path.string());
  }
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) fail(DatasetErrorCategory::kIo, "cannot stat " + path.string());
  const std::size_t row_bytes = 4 * dim;
  if (bytes % row_bytes != 0) {
    fail(DatasetErrorCategory::kSizeMismatch,
         path.filename().string() + " holds " + std::to_string(bytes) +
             " bytes, not a multiple of " + std::to_string(row_bytes) +
             " (dim " + std::to_string(dim) + " x 4 bytes)");
  }
  MatrixF m(bytes / row_bytes, dim);
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(DatasetErrorCategory::kIo, "cannot open " + path.string());
  io::read_f32_le(in, m.values());
  return m;
}

void write_matrix(const std::filesystem::path& path, const MatrixF& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(DatasetErrorCategory::kIo, "cannot write " + path.string());
  io::write_f32_le(out, m.values());
  if (!out) fail(DatasetErrorCategory::kIo, "write failed for " + path.string());
}

std::vector<std::size_t> read_index_list(const Json& node,
                                         const std::string& key,
                                         const std::string& cluster_id) {
  if (!node.contains(key)) {
    fail(DatasetErrorCategory::kManifest,
         "cluster " + cluster_id + " lacks \"" + key + "\"");
  }
  std::vector<std::size_t> out;
  for (const auto& v : node.at(key)) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      fail(DatasetErrorCategory::kManifest,
           "cluster " + cluster_id + " has a non-index entry in \"" + key + "\"");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

SemanticCluster parse_cluster(const Json& node) {
  if (!node.is_object() || !node.contains("cluster_id") ||
      !node.at("cluster_id").is_string()) {
    fail(DatasetErrorCategory::kManifest, "cluster entry without a string cluster_id");
  }
  SemanticCluster c;
  c.cluster_id = node.at("cluster_id").get<std::string>();
  const auto& real = node.contains("real_row") ? node.at("real_row") : Json();
  if (!real.is_number_integer() || real.get<std::int64_t>() < 0) {
    fail(DatasetErrorCategory::kManifest,
         "cluster " + c.cluster_id + " has no valid real_row");
  }
  c.real_row = real.get<std::size_t>();
  c.fake_rows = read_index_list(node, "fake_rows", c.cluster_id);
  c.caption_rows = read_index_list(node, "caption_rows", c.cluster_id);
  if (node.contains("captions")) {
    for (const auto& t : node.at("captions")) {
      if (!t.is_string()) {
        fail(DatasetErrorCategory::kManifest,
             "cluster " + c.cluster_id + " has a non-string caption");
      }
      c.captions.push_back(t.get<std::string>());
    }
  }
  return c;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  for (Split s : kAllSplits) {
    if (split_name(s) == name) return s;
  }
  fail(DatasetErrorCategory::kUnknownSplit, "unknown split \"" + std::string(name) + "\"");
}

std::string_view category_name(DatasetErrorCategory category) {
  switch (category) {
    case DatasetErrorCategory::kMissingFile: return "missing_file";
    case DatasetErrorCategory::kManifest: return "manifest";
    case DatasetErrorCategory::kSizeMismatch: return "size_mismatch";
    case DatasetErrorCategory::kIndexOutOfRange: return "index_out_of_range";
    case DatasetErrorCategory::kDuplicateReference: return "duplicate_reference";
    case DatasetErrorCategory::kNonFinite: return "non_finite";
    case DatasetErrorCategory::kNotNormalized: return "not_normalized";
    case DatasetErrorCategory::kClusterShape: return "cluster_shape";
    case DatasetErrorCategory::kDegenerateRow: return "degenerate_row";
    case DatasetErrorCategory::kUnknownSplit: return "unknown_split";
    case DatasetErrorCategory::kIo: return "io";
  }
  return "unknown";
}

EmbeddingDataset::EmbeddingDataset(std::size_t dim, MatrixF images,
                                   MatrixF texts, SplitClusters splits,
                                   bool normalized)
    : dim_(dim),
      images_(std::move(images)),
      texts_(std::move(texts)),
      splits_(std::move(splits)),
      normalized_(normalized) {
  if (images_.rows() == 0) images_ = MatrixF(0, dim_);
  if (texts_.rows() == 0) texts_ = MatrixF(0, dim_);
  validate();
}

bool EmbeddingDataset::has_captions() const {
  bool any = false;
  for_each_cluster(splits_, [&](Split, const SemanticCluster& c) {
    any = any || !c.caption_rows.empty();
  });
  return any;
}

void EmbeddingDataset::validate() const {
  if (dim_ == 0) fail(DatasetErrorCategory::kManifest, "dim must be positive");
  if ((images_.rows() > 0 && images_.cols() != dim_) ||
      (texts_.rows() > 0 && texts_.cols() != dim_)) {
    fail(DatasetErrorCategory::kSizeMismatch, "matrix width differs from dim");
  }
  check_finite(images_, "image");
  check_finite(texts_, "text");

  // image row -> owning cluster id, to catch cross-cluster reuse
  std::unordered_map<std::size_t, const std::string*> owner;
  auto claim = [&](std::size_t row, const SemanticCluster& c, const char* role) {
    if (row >= images_.rows()) {
      fail(DatasetErrorCategory::kIndexOutOfRange,
           "cluster " + c.cluster_id + ": " + role + " row " +
               std::to_string(row) + " >= " + std::to_string(images_.rows()));
    }
    auto [it, inserted] = owner.emplace(row, &c.cluster_id);
    if (!inserted) {
      fail(DatasetErrorCategory::kDuplicateReference,
           "cluster " + c.cluster_id + ": image row " + std::to_string(row) +
               " already referenced by cluster " + *it->second);
    }
  };

  for_each_cluster(splits_, [&](Split, const SemanticCluster& c) {
    if (c.fake_rows.empty()) {
      fail(DatasetErrorCategory::kClusterShape,
           "cluster " + c.cluster_id + " has no fake rows");
    }
    if (!c.caption_rows.empty() && c.caption_rows.size() != c.fake_rows.size()) {
      fail(DatasetErrorCategory::kClusterShape,
           "cluster " + c.cluster_id + " has " +
               std::to_string(c.fake_rows.size()) + " fakes but " +
               std::to_string(c.caption_rows.size()) + " captions");
    }
    if (!c.captions.empty() && c.captions.size() != c.fake_rows.size()) {
      fail(DatasetErrorCategory::kClusterShape,
           "cluster " + c.cluster_id + " caption text count differs from N");
    }
    std::unordered_set<std::size_t> seen_captions;
    for (std::size_t row : c.caption_rows) {
      if (row >= texts_.rows()) {
        fail(DatasetErrorCategory::kIndexOutOfRange,
             "cluster " + c.cluster_id + ": caption row " + std::to_string(row) +
                 " >= " + std::to_string(texts_.rows()));
      }
      if (!seen_captions.insert(row).second) {
        fail(DatasetErrorCategory::kDuplicateReference,
             "cluster " + c.cluster_id + ": caption row " +
                 std::to_string(row) + " listed twice");
      }
    }
    claim(c.real_row, c, "real");
    for (std::size_t row : c.fake_rows) claim(row, c, "fake");
  });

  if (!normalized_) return;
  auto check_unit = [&](const MatrixF& m, std::size_t row, const SemanticCluster& c,
                        const char* which) {
    const double n = row_norm(m.row(row));
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      fail(DatasetErrorCategory::kNotNormalized,
           "cluster " + c.cluster_id + ": " + which + " row " +
               std::to_string(row) + " has norm " + std::to_string(n));
    }
  };
  for_each_cluster(splits_, [&](Split, const SemanticCluster& c) {
    check_unit(images_, c.real_row, c, "image");
    for (std::size_t r : c.fake_rows) check_unit(images_, r, c, "image");
    for (std::size_t r : c.caption_rows) check_unit(texts_, r, c, "text");
  });
}

EmbeddingDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(manifest_path, ec)) {
    fail(DatasetErrorCategory::kMissingFile, "missing " + manifest_path.string());
  }
  Json manifest;
  try {
    manifest = Json::parse(io::read_file_text(manifest_path));
  } catch (const Json::exception& e) {
    fail(DatasetErrorCategory::kManifest, std::string("invalid JSON: ") + e.what());
  }
  auto require = [&](const char* key) -> const Json& {
    if (!manifest.is_object() || !manifest.contains(key)) {
      fail(DatasetErrorCategory::kManifest, std::string("missing key \"") + key + "\"");
    }
    return manifest.at(key);
  };
  const auto& version = require("version");
  if (!version.is_string() || version.get<std::string>() != kDatasetVersion) {
    fail(DatasetErrorCategory::kManifest, "unsupported version " + version.dump());
  }
  const auto& dtype = require("dtype");
  if (!dtype.is_string() || dtype.get<std::string>() != kDatasetDtype) {
    fail(DatasetErrorCategory::kManifest, "unsupported dtype " + dtype.dump());
  }
  const auto& dim_node = require("dim");
  if (!dim_node.is_number_integer() || dim_node.get<std::int64_t>() <= 0) {
    fail(DatasetErrorCategory::kManifest, "dim must be a positive integer");
  }
  const auto dim = dim_node.get<std::size_t>();
  const auto& normalized = require("normalized");
  if (!normalized.is_boolean()) {
    fail(DatasetErrorCategory::kManifest, "normalized must be a boolean");
  }
  const auto& image_file = require("image_file");
  const auto& text_file = require("text_file");
  if (!image_file.is_string() || !text_file.is_string()) {
    fail(DatasetErrorCategory::kManifest, "image_file/text_file must be strings");
  }

  SplitClusters splits;
  const auto& split_node = require("splits");
  if (!split_node.is_object()) fail(DatasetErrorCategory::kManifest, "splits must be an object");
  for (const auto& [name, clusters] : split_node.items()) {
    const Split split = parse_split(name);
    if (!clusters.is_array()) {
      fail(DatasetErrorCategory::kManifest, "split " + name + " must be an array");
    }
    for (const auto& node : clusters) {
      splits[static_cast<std::size_t>(split)].push_back(parse_cluster(node));
    }
  }

  MatrixF images = read_matrix(dir / image_file.get<std::string>(), dim);
  MatrixF texts = read_matrix(dir / text_file.get<std::string>(), dim);
  return EmbeddingDataset(dim, std::move(images), std::move(texts),
                          std::move(splits), normalized.get<bool>());
}

void save_dataset(const EmbeddingDataset& dataset,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(DatasetErrorCategory::kIo, "cannot create " + dir.string());

  Json manifest;
  manifest["version"] = kDatasetVersion;
  manifest["dim"] = dataset.dim();
  manifest["dtype"] = kDatasetDtype;
  manifest["normalized"] = dataset.normalized();
  manifest["image_file"] = kImageFile;
  manifest["text_file"] = kTextFile;
  Json splits = Json::object();
  for (Split split : kAllSplits) {
    Json list = Json::array();
    for (const auto& c : dataset.clusters(split)) {
      Json node;
      node["cluster_id"] = c.cluster_id;
      node["real_row"] = c.real_row;
      node["fake_rows"] = c.fake_rows;
      node["caption_rows"] = c.caption_rows;
      if (!c.captions.empty()) node["captions"] = c.captions;
      list.push_back(std::move(node));
    }
    splits[std::string(split_name(split))] = std::move(list);
  }
  manifest["splits"] = std::move(splits);

  write_matrix(dir / kImageFile, dataset.images());
  write_matrix(dir / kTextFile, dataset.texts());
  io::write_file_text(dir / kManifestName, manifest.dump(2) + "\n");
}

EmbeddingDataset l2_normalize(const EmbeddingDataset& dataset) {
  MatrixF images = dataset.images();
  MatrixF texts = dataset.texts();
  std::vector<bool> image_done(images.rows(), false);
  std::vector<bool> text_done(texts.rows(), false);

  auto scale = [](MatrixF& m, std::vector<bool>& done, std::size_t row,
                  const char* which) {
    if (done[row]) return;
    done[row] = true;
    auto values = m.row(row);
    const double n = row_norm(values);
    if (!(n >= kMinRowNorm)) {
      fail(DatasetErrorCategory::kDegenerateRow,
           std::string(which) + " row " + std::to_string(row) +
               " has near-zero norm");
    }
    for (float& v : values) v = static_cast<float>(static_cast<double>(v) / n);
  };
  for_each_cluster(dataset.splits(), [&](Split, const SemanticCluster& c) {
    scale(images, image_done, c.real_row, "image");
    for (std::size_t r : c.fake_rows) scale(images, image_done, r, "image");
    for (std::size_t r : c.caption_rows) scale(texts, text_done, r, "text");
  });
  return EmbeddingDataset(dataset.dim(), std::move(images), std::move(texts),
                          dataset.splits(), true);
}

std::vector<LabeledRow> balanced_sample(const EmbeddingDataset& dataset,
                                        Split split, std::uint64_t seed) {
  Rng rng(seed, 0xba1a0000u + static_cast<std::uint64_t>(split));
  std::vector<LabeledRow> out;
  const auto clusters = dataset.clusters(split);
  out.reserve(2 * clusters.size());
  for (const auto& c : clusters) {
    out.push_back({c.real_row, Authenticity::kReal});
    out.push_back({c.fake_rows[rng.uniform_index(c.fake_rows.size())],
                   Authenticity::kFake});
  }
  return out;
}

std::vector<LabeledRow> split_members(const EmbeddingDataset& dataset,
                                      Split split) {
  std::vector<LabeledRow> out;
  for (const auto& c : dataset.clusters(split)) {
    out.push_back({c.real_row, Authenticity::kReal});
    for (std::size_t r : c.fake_rows) out.push_back({r, Authenticity::kFake});
  }
  return out;
}

namespace {
MatrixD gather(const MatrixF& m, std::span<const std::size_t> rows) {
  MatrixD out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}
}  // namespace

MatrixD gather_image_rows(const EmbeddingDataset& dataset,
                          std::span<const std::size_t> rows) {
  return gather(dataset.images(), rows);
}

MatrixD gather_text_rows(const EmbeddingDataset& dataset,
                         std::span<const std::size_t> rows) {
  return gather(dataset.texts(), rows);
}

}  // namespace clusterprobe
