#ifndef SCORE_DATAIO_HPP
#define SCORE_DATAIO_HPP

/**
 * @file dataio.hpp
 * @brief Binary tensor files, compressed-label containers, dataset manifests
 *        and condensed-artifact directories. Layouts are documented in
 *        docs/formats.md.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "score/label_compress.hpp"
#include "score/selector.hpp"

namespace score {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.3.0";

enum class DType : std::uint8_t { Float64 = 0, Float32 = 1 };

struct MatrixFileHeader {
  std::uint16_t version = 1;
  DType dtype = DType::Float64;
  std::vector<std::uint64_t> dims;
};

/// Dense 2-d or 3-d array, row-major.
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;

  std::uint64_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t checksum_file(const fs::path& path);
std::string checksum_hex(std::uint64_t checksum);

std::vector<std::uint8_t> read_file_bytes(const fs::path& path);
void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);

/// Writes an "SCRM" file and returns its FNV-1a checksum.
std::uint64_t save_tensor(const Tensor& tensor, const fs::path& path, DType dtype = DType::Float64);
Tensor load_tensor(const fs::path& path, MatrixFileHeader* header = nullptr);

std::uint64_t save_matrix(const Eigen::MatrixXd& m, const fs::path& path, DType dtype = DType::Float64);
Eigen::MatrixXd load_matrix(const fs::path& path);

Tensor to_tensor(const SoftLabelStack& stack);
SoftLabelStack to_stack(const Tensor& tensor);

/// "SCRF" container for CompressedLabels.
std::vector<std::uint8_t> encode_compressed(const CompressedLabels& labels);
CompressedLabels decode_compressed(std::span<const std::uint8_t> bytes);

/// Sorted keys, two-space indent, floats at 17 significant digits, trailing newline.
std::string canonical_json(const Json& value);
void write_canonical_json(const Json& value, const fs::path& path);
Json read_json(const fs::path& path);

struct DatasetManifest {
  int schema_version = 1;
  std::string features_file = "features.bin";
  std::uint64_t features_checksum = 0;
  std::string classes_file = "classes.bin";
  std::uint64_t classes_checksum = 0;
  std::string soft_labels_file = "soft_labels.bin";
  std::uint64_t soft_labels_checksum = 0;
  int num_classes = 0;
  std::vector<SampleId> sample_ids;
  std::string provenance;

  Json to_json() const;
  static DatasetManifest from_json(const Json& j);
};

struct Dataset {
  DatasetManifest manifest;
  FeatureSet features;
  SoftLabelStack labels;
};

inline constexpr const char* kDatasetManifestName = "dataset.json";

/// Writes features.bin, classes.bin, soft_labels.bin and dataset.json into `dir`.
DatasetManifest save_dataset(const fs::path& dir, const FeatureSet& features, const SoftLabelStack& labels,
                             const std::string& provenance);
/// Loads a dataset directory (or a dataset.json path), verifying every checksum.
Dataset load_dataset(const fs::path& location);

Json selection_config_to_json(const SelectionConfig& config);
SelectionConfig selection_config_from_json(const Json& j);

struct CondensedArtifact {
  std::string dataset_manifest;        // path of dataset.json, relative to the artifact directory
  std::uint64_t dataset_checksum = 0;  // checksum of that dataset.json
  SelectionResult selection;           // positions and timings are not persisted
  SoftLabelStack labels;               // selected samples' soft labels, class by class in pick order
  std::optional<CompressedLabels> compressed;
  std::string tool_version = kToolVersion;
};

/// Writes manifest.json, selection.json, labels.bin and (when compressed) factors.bin.
void save_artifact(const CondensedArtifact& artifact, const fs::path& dir);
CondensedArtifact load_artifact(const fs::path& dir);

/// Selected ids flattened class by class, matching the order of CondensedArtifact::labels.
std::vector<SampleId> flatten_ids(const SelectionResult& selection);

}  // namespace score

#endif  // SCORE_DATAIO_HPP
