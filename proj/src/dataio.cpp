#include "score/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace score {

namespace {

constexpr std::uint16_t kFormatVersion = 1;

class ByteWriter {
 public:
  void bytes(const char* data, std::size_t n) { buf_.insert(buf_.end(), data, data + n); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v), 4); }
  void scalar(double v, DType dtype) {
    if (dtype == DType::Float64)
      f64(v);
    else
      f32(static_cast<float>(v));
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  bool has(std::size_t n) const { return data_.size() - pos_ >= n; }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::string text(std::size_t n) {
    need(n);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(get_le(8)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(4))); }
  double scalar(DType dtype) { return dtype == DType::Float64 ? f64() : static_cast<double>(f32()); }

 private:
  void need(std::size_t n) const {
    if (!has(n)) fail(ErrorCode::TruncatedPayload, "file ends before the declared payload");
  }
  std::uint64_t get_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::size_t scalar_size(DType dtype) { return dtype == DType::Float64 ? 8 : 4; }

DType parse_dtype(std::uint8_t raw) {
  if (raw > 1) fail(ErrorCode::SchemaMismatch, "unknown dtype code " + std::to_string(raw));
  return static_cast<DType>(raw);
}

void format_number(double v, std::string& out) {
  if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "cannot serialize a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

bool is_scalar(const Json& j) { return !j.is_array() && !j.is_object(); }

void write_json(const Json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case Json::value_t::number_float:
      format_number(j.get<double>(), out);
      return;
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (std::all_of(j.begin(), j.end(), is_scalar)) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_json(j[i], out, depth + 1);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad;
        write_json(j[i], out, depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += close_pad + "]";
      return;
    }
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad + Json(it.key()).dump() + ": ";
        write_json(it.value(), out, depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += close_pad + "}";
      return;
    }
    default:
      out += j.dump();
  }
}

std::uint64_t parse_checksum(const Json& j) {
  const auto text = j.get<std::string>();
  return std::stoull(text, nullptr, 16);
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorCode::SchemaMismatch, std::string("missing field '") + key + "'");
  return j.at(key);
}

void verify_checksum(const fs::path& path, std::uint64_t expected) {
  if (checksum_file(path) != expected) fail(ErrorCode::ChecksumMismatch, path.string() + " does not match its recorded checksum");
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t checksum_file(const fs::path& path) { return fnv1a64(read_file_bytes(path)); }

std::string checksum_hex(std::uint64_t checksum) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum));
  return buf;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

std::uint64_t save_tensor(const Tensor& tensor, const fs::path& path, DType dtype) {
  if (tensor.dims.size() != 2 && tensor.dims.size() != 3) fail(ErrorCode::InvalidArgument, "tensors must be 2-d or 3-d");
  if (tensor.values.size() != tensor.element_count()) fail(ErrorCode::DimensionMismatch, "tensor payload length differs from dims");
  ByteWriter w;
  w.bytes("SCRM", 4);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u8(static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) w.u64(d);
  for (double v : tensor.values) w.scalar(v, dtype);
  write_file_bytes(path, w.buffer());
  return fnv1a64(w.buffer());
}

Tensor load_tensor(const fs::path& path, MatrixFileHeader* header) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  if (!r.has(4) || r.text(4) != "SCRM") fail(ErrorCode::BadMagic, path.string() + " is not a SCRM file");
  MatrixFileHeader h;
  h.version = r.u16();
  if (h.version != kFormatVersion) fail(ErrorCode::BadVersion, "unsupported SCRM version " + std::to_string(h.version));
  h.dtype = parse_dtype(r.u8());
  const auto ndim = r.u8();
  if (ndim != 2 && ndim != 3) fail(ErrorCode::SchemaMismatch, "SCRM ndim must be 2 or 3");
  Tensor t;
  for (int i = 0; i < ndim; ++i) t.dims.push_back(r.u64());
  h.dims = t.dims;
  const auto count = t.element_count();
  if (r.remaining() / scalar_size(h.dtype) < count) fail(ErrorCode::TruncatedPayload, path.string() + " payload is truncated");
  if (r.remaining() != count * scalar_size(h.dtype)) fail(ErrorCode::SchemaMismatch, path.string() + " has trailing bytes");
  t.values.resize(count);
  for (auto& v : t.values) v = r.scalar(h.dtype);
  if (header) *header = h;
  return t;
}

std::uint64_t save_matrix(const Eigen::MatrixXd& m, const fs::path& path, DType dtype) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMajorMatrix>(t.values.data(), m.rows(), m.cols()) = m;
  return save_tensor(t, path, dtype);
}

Eigen::MatrixXd load_matrix(const fs::path& path) {
  const auto t = load_tensor(path);
  if (t.dims.size() != 2) fail(ErrorCode::SchemaMismatch, path.string() + " is not a 2-d matrix");
  return Eigen::Map<const RowMajorMatrix>(t.values.data(), static_cast<Index>(t.dims[0]), static_cast<Index>(t.dims[1]));
}

Tensor to_tensor(const SoftLabelStack& stack) {
  return {{static_cast<std::uint64_t>(stack.num_samples), static_cast<std::uint64_t>(stack.num_augs),
           static_cast<std::uint64_t>(stack.num_classes)},
          stack.data};
}

SoftLabelStack to_stack(const Tensor& tensor) {
  if (tensor.dims.size() != 3) fail(ErrorCode::SchemaMismatch, "soft-label tensors are 3-d");
  SoftLabelStack s;
  s.num_samples = static_cast<Index>(tensor.dims[0]);
  s.num_augs = static_cast<Index>(tensor.dims[1]);
  s.num_classes = static_cast<Index>(tensor.dims[2]);
  s.data = tensor.values;
  return s;
}

std::vector<std::uint8_t> encode_compressed(const CompressedLabels& labels) {
  const DType dtype = labels.bytes_per_scalar == 4 ? DType::Float32 : DType::Float64;
  ByteWriter w;
  w.bytes("SCRF", 4);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(labels.method));
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u64(static_cast<std::uint64_t>(labels.num_samples));
  w.u64(static_cast<std::uint64_t>(labels.num_augs));
  w.u64(static_cast<std::uint64_t>(labels.num_classes));
  w.u64(static_cast<std::uint64_t>(labels.rank));
  w.u64(static_cast<std::uint64_t>(labels.sparse_budget));
  w.f64(labels.requested_ratio);
  w.u32(static_cast<std::uint32_t>(labels.rpca_unconverged));
  for (const auto& s : labels.samples) {
    w.u64(static_cast<std::uint64_t>(s.left.cols()));
    w.u64(static_cast<std::uint64_t>(s.right.rows()));
    w.u8(s.dense_core() ? 1 : 0);
    w.u64(s.sparse.size());
    const RowMajorMatrix left = s.left;
    for (Index i = 0; i < left.size(); ++i) w.scalar(left.data()[i], dtype);
    if (s.dense_core()) {
      const RowMajorMatrix core = s.core;
      for (Index i = 0; i < core.size(); ++i) w.scalar(core.data()[i], dtype);
    } else {
      for (Index i = 0; i < s.sigma.size(); ++i) w.scalar(s.sigma(i), dtype);
    }
    const RowMajorMatrix right = s.right;
    for (Index i = 0; i < right.size(); ++i) w.scalar(right.data()[i], dtype);
    for (const auto& e : s.sparse) {
      w.u32(e.row);
      w.u32(e.col);
      w.scalar(e.value, dtype);
    }
  }
  return std::move(w.buffer());
}

CompressedLabels decode_compressed(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.has(4) || r.text(4) != "SCRF") fail(ErrorCode::BadMagic, "not a SCRF container");
  if (r.u16() != kFormatVersion) fail(ErrorCode::BadVersion, "unsupported SCRF version");
  CompressedLabels out;
  const auto method = r.u8();
  if (method > 3) fail(ErrorCode::MalformedFactors, "unknown compression method code");
  out.method = static_cast<CompressionMethod>(method);
  const DType dtype = parse_dtype(r.u8());
  out.bytes_per_scalar = static_cast<int>(scalar_size(dtype));
  out.num_samples = static_cast<Index>(r.u64());
  out.num_augs = static_cast<Index>(r.u64());
  out.num_classes = static_cast<Index>(r.u64());
  out.rank = static_cast<Index>(r.u64());
  out.sparse_budget = static_cast<Index>(r.u64());
  out.requested_ratio = r.f64();
  out.rpca_unconverged = static_cast<int>(r.u32());
  const Index k = out.num_augs;
  const Index c = out.num_classes;
  const std::uint64_t limit = static_cast<std::uint64_t>(std::max<Index>(k, c));
  for (Index i = 0; i < out.num_samples; ++i) {
    SampleFactors s;
    const auto left_cols = r.u64();
    const auto right_rows = r.u64();
    const auto dense = r.u8();
    const auto nnz = r.u64();
    if (left_cols > limit || right_rows > limit || dense > 1 || nnz > static_cast<std::uint64_t>(k * c))
      fail(ErrorCode::MalformedFactors, "factor dimensions exceed the label shape");
    const auto a = static_cast<Index>(left_cols);
    const auto b = static_cast<Index>(right_rows);
    RowMajorMatrix left(k, a);
    for (Index j = 0; j < left.size(); ++j) left.data()[j] = r.scalar(dtype);
    s.left = left;
    if (dense) {
      RowMajorMatrix core(a, b);
      for (Index j = 0; j < core.size(); ++j) core.data()[j] = r.scalar(dtype);
      s.core = core;
    } else {
      if (a != b) fail(ErrorCode::MalformedFactors, "diagonal core needs matching factor ranks");
      s.sigma.resize(a);
      for (Index j = 0; j < a; ++j) s.sigma(j) = r.scalar(dtype);
    }
    RowMajorMatrix right(b, c);
    for (Index j = 0; j < right.size(); ++j) right.data()[j] = r.scalar(dtype);
    s.right = right;
    for (std::uint64_t j = 0; j < nnz; ++j) {
      SparseEntry e;
      e.row = r.u32();
      e.col = r.u32();
      e.value = r.scalar(dtype);
      s.sparse.push_back(e);
    }
    out.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) fail(ErrorCode::MalformedFactors, "trailing bytes after the last sample");
  out.original_bytes = static_cast<std::uint64_t>(out.num_samples * k * c) * static_cast<std::uint64_t>(out.bytes_per_scalar);
  out.stored_bytes = out.account_bytes();
  return out;
}

std::string canonical_json(const Json& value) {
  std::string out;
  write_json(value, out, 0);
  out += '\n';
  return out;
}

void write_canonical_json(const Json& value, const fs::path& path) {
  const auto text = canonical_json(value);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Json read_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    fail(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
  }
}

Json DatasetManifest::to_json() const {
  Json j;
  j["schema"] = "score.dataset";
  j["schema_version"] = schema_version;
  j["features"] = {{"path", features_file}, {"checksum", checksum_hex(features_checksum)}};
  j["classes"] = {{"path", classes_file}, {"checksum", checksum_hex(classes_checksum)}};
  j["soft_labels"] = {{"path", soft_labels_file}, {"checksum", checksum_hex(soft_labels_checksum)}};
  j["num_classes"] = num_classes;
  j["sample_ids"] = sample_ids;
  j["provenance"] = provenance;
  return j;
}

DatasetManifest DatasetManifest::from_json(const Json& j) {
  try {
    if (field(j, "schema").get<std::string>() != "score.dataset") fail(ErrorCode::SchemaMismatch, "not a dataset manifest");
    DatasetManifest m;
    m.schema_version = field(j, "schema_version").get<int>();
    if (m.schema_version != 1) fail(ErrorCode::SchemaMismatch, "unsupported dataset schema version");
    m.features_file = field(field(j, "features"), "path").get<std::string>();
    m.features_checksum = parse_checksum(field(field(j, "features"), "checksum"));
    m.classes_file = field(field(j, "classes"), "path").get<std::string>();
    m.classes_checksum = parse_checksum(field(field(j, "classes"), "checksum"));
    m.soft_labels_file = field(field(j, "soft_labels"), "path").get<std::string>();
    m.soft_labels_checksum = parse_checksum(field(field(j, "soft_labels"), "checksum"));
    m.num_classes = field(j, "num_classes").get<int>();
    m.sample_ids = field(j, "sample_ids").get<std::vector<SampleId>>();
    m.provenance = field(j, "provenance").get<std::string>();
    return m;
  } catch (const Json::exception& e) {
    fail(ErrorCode::SchemaMismatch, std::string("dataset manifest: ") + e.what());
  }
}

DatasetManifest save_dataset(const fs::path& dir, const FeatureSet& features, const SoftLabelStack& labels,
                             const std::string& provenance) {
  features.validate();
  if (labels.num_samples != features.size()) fail(ErrorCode::DimensionMismatch, "labels are not aligned with features");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string());

  DatasetManifest m;
  m.num_classes = features.num_classes;
  m.sample_ids = features.sample_ids;
  m.provenance = provenance;
  m.features_checksum = save_matrix(features.features, dir / m.features_file);
  Eigen::MatrixXd classes(1, features.size());
  for (Index i = 0; i < features.size(); ++i) classes(0, i) = features.labels[static_cast<std::size_t>(i)];
  m.classes_checksum = save_matrix(classes, dir / m.classes_file);
  m.soft_labels_checksum = save_tensor(to_tensor(labels), dir / m.soft_labels_file);
  write_canonical_json(m.to_json(), dir / kDatasetManifestName);
  return m;
}

Dataset load_dataset(const fs::path& location) {
  const fs::path manifest_path = fs::is_directory(location) ? location / kDatasetManifestName : location;
  const fs::path dir = manifest_path.parent_path();
  Dataset ds;
  ds.manifest = DatasetManifest::from_json(read_json(manifest_path));
  verify_checksum(dir / ds.manifest.features_file, ds.manifest.features_checksum);
  verify_checksum(dir / ds.manifest.classes_file, ds.manifest.classes_checksum);
  verify_checksum(dir / ds.manifest.soft_labels_file, ds.manifest.soft_labels_checksum);

  ds.features.features = load_matrix(dir / ds.manifest.features_file);
  const Eigen::MatrixXd classes = load_matrix(dir / ds.manifest.classes_file);
  if (classes.rows() != 1 || classes.cols() != ds.features.features.cols())
    fail(ErrorCode::SchemaMismatch, "class file shape differs from features");
  for (Index i = 0; i < classes.cols(); ++i) ds.features.labels.push_back(static_cast<int>(classes(0, i)));
  ds.features.sample_ids = ds.manifest.sample_ids;
  ds.features.num_classes = ds.manifest.num_classes;
  ds.features.validate();
  ds.labels = to_stack(load_tensor(dir / ds.manifest.soft_labels_file));
  if (ds.labels.num_samples != ds.features.size()) fail(ErrorCode::SchemaMismatch, "soft labels are not aligned with features");
  return ds;
}

Json selection_config_to_json(const SelectionConfig& config) {
  Json j;
  j["ipc"] = config.ipc;
  j["alpha"] = config.alpha;
  j["beta"] = config.beta;
  j["epsilon_sq"] = config.params.epsilon_sq;
  j["scaling"] = config.params.scaling == ScalingMode::Adaptive ? "adaptive" : "fixed";
  if (config.params.scaling == ScalingMode::Fixed) j["gamma_fixed"] = config.params.gamma_fixed;
  j["candidate_batch"] = config.candidate_batch;
  j["mode"] = config.mode == SelectionMode::PerClass ? "per-class" : "global-capped";
  j["seed"] = config.seed;
  return j;
}

SelectionConfig selection_config_from_json(const Json& j) {
  try {
    SelectionConfig c;
    c.ipc = field(j, "ipc").get<int>();
    c.alpha = field(j, "alpha").get<double>();
    c.beta = field(j, "beta").get<double>();
    c.params.epsilon_sq = field(j, "epsilon_sq").get<double>();
    const auto scaling = field(j, "scaling").get<std::string>();
    if (scaling == "fixed") {
      c.params.scaling = ScalingMode::Fixed;
      c.params.gamma_fixed = field(j, "gamma_fixed").get<double>();
    } else if (scaling != "adaptive") {
      fail(ErrorCode::SchemaMismatch, "unknown scaling mode '" + scaling + "'");
    }
    c.candidate_batch = field(j, "candidate_batch").get<Index>();
    const auto mode = field(j, "mode").get<std::string>();
    if (mode == "global-capped")
      c.mode = SelectionMode::GlobalCapped;
    else if (mode != "per-class")
      fail(ErrorCode::SchemaMismatch, "unknown selection mode '" + mode + "'");
    c.seed = field(j, "seed").get<std::uint64_t>();
    return c;
  } catch (const Json::exception& e) {
    fail(ErrorCode::SchemaMismatch, std::string("selection config: ") + e.what());
  }
}

std::vector<SampleId> flatten_ids(const SelectionResult& selection) {
  std::vector<SampleId> out;
  for (const auto& ids : selection.selected_ids) out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

void save_artifact(const CondensedArtifact& artifact, const fs::path& dir) {
  const auto total = static_cast<Index>(flatten_ids(artifact.selection).size());
  if (artifact.labels.num_samples != total)
    fail(ErrorCode::SchemaMismatch, "label container sample count differs from the selection size");
  if (artifact.compressed && artifact.compressed->num_samples != total)
    fail(ErrorCode::SchemaMismatch, "compressed label count differs from the selection size");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string());

  Json selection;
  selection["schema"] = "score.selection";
  selection["schema_version"] = 1;
  selection["config"] = selection_config_to_json(artifact.selection.config);
  selection["selected_ids"] = artifact.selection.selected_ids;
  selection["per_round_scores"] = artifact.selection.per_round_scores;
  write_canonical_json(selection, dir / "selection.json");

  Json files;
  files["selection.json"] = checksum_hex(checksum_file(dir / "selection.json"));
  files["labels.bin"] = checksum_hex(save_tensor(to_tensor(artifact.labels), dir / "labels.bin"));
  if (artifact.compressed) {
    const auto bytes = encode_compressed(*artifact.compressed);
    write_file_bytes(dir / "factors.bin", bytes);
    files["factors.bin"] = checksum_hex(fnv1a64(bytes));
  } else if (fs::exists(dir / "factors.bin")) {
    fs::remove(dir / "factors.bin");
  }

  Json manifest;
  manifest["schema"] = "score.artifact";
  manifest["schema_version"] = 1;
  manifest["tool_version"] = artifact.tool_version;
  manifest["dataset"] = {{"path", artifact.dataset_manifest}, {"checksum", checksum_hex(artifact.dataset_checksum)}};
  manifest["files"] = files;
  manifest["num_selected"] = total;
  manifest["num_classes"] = artifact.selection.selected_ids.size();
  write_canonical_json(manifest, dir / "manifest.json");
}

CondensedArtifact load_artifact(const fs::path& dir) {
  const Json manifest = read_json(dir / "manifest.json");
  CondensedArtifact a;
  try {
    if (field(manifest, "schema").get<std::string>() != "score.artifact" || field(manifest, "schema_version").get<int>() != 1)
      fail(ErrorCode::SchemaMismatch, "not a version-1 artifact manifest");
    a.tool_version = field(manifest, "tool_version").get<std::string>();
    a.dataset_manifest = field(field(manifest, "dataset"), "path").get<std::string>();
    a.dataset_checksum = parse_checksum(field(field(manifest, "dataset"), "checksum"));
    const Json& files = field(manifest, "files");
    verify_checksum(dir / "selection.json", parse_checksum(field(files, "selection.json")));
    verify_checksum(dir / "labels.bin", parse_checksum(field(files, "labels.bin")));

    const Json selection = read_json(dir / "selection.json");
    if (field(selection, "schema").get<std::string>() != "score.selection")
      fail(ErrorCode::SchemaMismatch, "not a selection file");
    a.selection.config = selection_config_from_json(field(selection, "config"));
    a.selection.selected_ids = field(selection, "selected_ids").get<std::vector<std::vector<SampleId>>>();
    a.selection.per_round_scores = field(selection, "per_round_scores").get<std::vector<double>>();
    a.labels = to_stack(load_tensor(dir / "labels.bin"));

    if (files.contains("factors.bin")) {
      const auto bytes = read_file_bytes(dir / "factors.bin");
      if (fnv1a64(bytes) != parse_checksum(files.at("factors.bin")))
        fail(ErrorCode::ChecksumMismatch, "factors.bin does not match its recorded checksum");
      a.compressed = decode_compressed(bytes);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::SchemaMismatch, std::string("artifact manifest: ") + e.what());
  }

  const auto ids = flatten_ids(a.selection);
  if (a.labels.num_samples != static_cast<Index>(ids.size()))
    fail(ErrorCode::SchemaMismatch, "label container sample count differs from the selection size");
  if (a.compressed && a.compressed->num_samples != static_cast<Index>(ids.size()))
    fail(ErrorCode::SchemaMismatch, "compressed label count differs from the selection size");

  const fs::path dataset_path = dir / a.dataset_manifest;
  if (fs::exists(dataset_path)) {
    verify_checksum(dataset_path, a.dataset_checksum);
    const auto ds = DatasetManifest::from_json(read_json(dataset_path));
    const std::set<SampleId> known(ds.sample_ids.begin(), ds.sample_ids.end());
    for (auto id : ids)
      if (!known.count(id)) fail(ErrorCode::SchemaMismatch, "selected id " + std::to_string(id) + " is not in the dataset");
  }
  return a;
}

}  // namespace score
