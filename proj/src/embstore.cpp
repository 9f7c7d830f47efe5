#include "socioprobe/embstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "socioprobe/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "SPEB codec assumes a little-endian host");

namespace socioprobe {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'S', 'P', 'E', 'B'};

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }

  void put_string(const std::string& s) {
    put(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

  void put_floats(std::span<const float> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    out_.insert(out_.end(), p, p + values.size_bytes());
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }

  template <typename T>
  T get(const char* what) {
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(const char* what) {
    const std::uint64_t start = pos_;
    const auto len = get<std::uint16_t>(what);
    if (bytes_.size() - pos_ < len) {
      throw FormatError(std::string("truncated ") + what, start);
    }
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void get_floats(std::span<float> out, const char* what) {
    require(out.size_bytes(), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated ") + what, pos_);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_finite(const EmbeddingRecord& r, std::uint64_t offset) {
  for (float v : r.values) {
    if (!std::isfinite(v)) {
      throw FormatError("non-finite component in record '" + r.id + "'",
                        offset);
    }
  }
}

EmbeddingDataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  EmbeddingDataset ds;
  bool fixed_schema = false;
  std::string line;
  std::uint64_t line_no = 0;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> dim;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (j.contains("labels")) {
      if (fixed_schema || !ds.records.empty()) {
        throw FormatError("labels header must be the first line", line_no);
      }
      ds.schema.class_names = j.at("labels").get<std::vector<std::string>>();
      fixed_schema = true;
      continue;
    }
    EmbeddingRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      const auto name = j.at("label").get<std::string>();
      auto idx = ds.schema.index_of(name);
      if (!idx) {
        if (fixed_schema) {
          throw FormatError("label '" + name + "' not in header", line_no);
        }
        ds.schema.class_names.push_back(name);
        idx = static_cast<std::uint32_t>(ds.schema.class_names.size() - 1);
      }
      rec.label = *idx;
      const auto& jl = j.at("layers");
      if (!layers) layers = jl.size();
      if (jl.size() != *layers) {
        throw FormatError("layer count mismatch", line_no);
      }
      for (const auto& vec : jl) {
        if (!dim) dim = vec.size();
        if (vec.size() != *dim) throw FormatError("dimension mismatch", line_no);
        for (const auto& v : vec) rec.values.push_back(v.get<float>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad record: ") + e.what(), line_no);
    }
    check_finite(rec, line_no);
    ds.records.push_back(std::move(rec));
  }
  ds.num_layers = static_cast<std::uint32_t>(layers.value_or(0));
  ds.dim = static_cast<std::uint32_t>(dim.value_or(0));
  return ds;
}

void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EmbeddingDataset take_records(const EmbeddingDataset& ds,
                              std::span<const std::size_t> indices) {
  EmbeddingDataset out = ds.empty_like();
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(ds.records[i]);
  return out;
}

}  // namespace

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
      offset_(offset) {}

std::optional<std::uint32_t> LabelSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (class_names[i] == name) return static_cast<std::uint32_t>(i);
  }
  return std::nullopt;
}

void LabelSchema::validate() const {
  if (class_names.size() < 2) {
    throw std::invalid_argument("label schema needs at least 2 classes");
  }
  std::set<std::string> seen;
  for (const auto& n : class_names) {
    if (n.empty()) throw std::invalid_argument("empty class name");
    if (!seen.insert(n).second) {
      throw std::invalid_argument("duplicate class name '" + n + "'");
    }
  }
}

EmbeddingDataset EmbeddingDataset::empty_like() const {
  EmbeddingDataset out;
  out.schema = schema;
  out.num_layers = num_layers;
  out.dim = dim;
  return out;
}

void EmbeddingDataset::validate() const {
  schema.validate();
  if (num_layers == 0 || dim == 0) {
    throw std::invalid_argument("num_layers and dim must be positive");
  }
  const std::size_t width = std::size_t{num_layers} * dim;
  for (const auto& r : records) {
    if (r.values.size() != width) {
      throw std::invalid_argument("record '" + r.id + "' has " +
                                  std::to_string(r.values.size()) +
                                  " values, expected " + std::to_string(width));
    }
    if (r.label >= schema.num_classes()) {
      throw std::invalid_argument("record '" + r.id + "' label out of range");
    }
    for (float v : r.values) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("record '" + r.id + "' has non-finite value");
      }
    }
  }
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0 && val_fraction > 0 && test_fraction > 0)) {
    throw std::invalid_argument("split fractions must be positive");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

std::vector<std::uint8_t> encode_speb(const EmbeddingDataset& ds) {
  ByteWriter w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put(ds.num_layers);
  w.put(ds.dim);
  w.put(static_cast<std::uint32_t>(ds.schema.num_classes()));
  for (const auto& name : ds.schema.class_names) w.put_string(name);
  w.put(static_cast<std::uint64_t>(ds.records.size()));
  for (const auto& r : ds.records) {
    w.put_string(r.id);
    w.put(r.label);
    w.put_floats(r.values);
  }
  return w.take();
}

EmbeddingDataset decode_speb(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  for (char& c : magic) c = r.get<char>("magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
  const std::uint64_t version_at = r.offset();
  if (r.get<std::uint32_t>("version") != kVersion) {
    throw FormatError("unsupported version", version_at);
  }

  EmbeddingDataset ds;
  ds.num_layers = r.get<std::uint32_t>("layer count");
  ds.dim = r.get<std::uint32_t>("dimension");
  const std::uint64_t k_at = r.offset();
  const auto k = r.get<std::uint32_t>("class count");
  if (ds.num_layers == 0 || ds.dim == 0) {
    throw FormatError("zero layer count or dimension", 8);
  }
  if (k < 2) throw FormatError("class count must be at least 2", k_at);
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::uint64_t at = r.offset();
    ds.schema.class_names.push_back(r.get_string("label name"));
    if (ds.schema.class_names.back().empty()) {
      throw FormatError("empty label name", at);
    }
  }
  try {
    ds.schema.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), k_at);
  }

  const std::uint64_t count_at = r.offset();
  const auto count = r.get<std::uint64_t>("record count");
  const std::size_t width = std::size_t{ds.num_layers} * ds.dim;
  // Each record needs at least 2 + 4 + 4*width bytes.
  if (count > bytes.size() / (6 + 4 * width)) {
    throw FormatError("record count exceeds file size", count_at);
  }
  ds.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t at = r.offset();
    EmbeddingRecord rec;
    rec.id = r.get_string("record id");
    const std::uint64_t label_at = r.offset();
    rec.label = r.get<std::uint32_t>("record label");
    if (rec.label >= k) {
      throw FormatError("label " + std::to_string(rec.label) +
                            " out of range for K=" + std::to_string(k),
                        label_at);
    }
    rec.values.resize(width);
    r.get_floats(rec.values, "record values");
    check_finite(rec, at);
    ds.records.push_back(std::move(rec));
  }
  if (!r.at_end()) {
    throw FormatError("trailing bytes after last record", r.offset());
  }
  return ds;
}

EmbeddingDataset read_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".jsonl") return read_jsonl(path);
  const auto bytes = slurp(path);
  return decode_speb(bytes);
}

void write_dataset(const EmbeddingDataset& dataset,
                   const std::filesystem::path& path) {
  write_bytes(path, encode_speb(dataset));
}

void write_dataset_jsonl(const EmbeddingDataset& dataset,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"labels", dataset.schema.class_names}}.dump() << '\n';
  for (const auto& r : dataset.records) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 1; l <= dataset.num_layers; ++l) {
      auto v = r.layer(l, dataset.dim);
      layers.push_back(std::vector<float>(v.begin(), v.end()));
    }
    out << nlohmann::json{{"id", r.id},
                          {"label", dataset.schema.class_names.at(r.label)},
                          {"layers", layers}}
               .dump()
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("cannot split an empty dataset");

  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.val_fraction));
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.test_fraction));
  if (n_val == 0) throw std::invalid_argument("validation split is empty");
  if (n_test == 0) throw std::invalid_argument("test split is empty");
  if (n_val + n_test >= n) throw std::invalid_argument("train split is empty");
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span(perm));

  SplitIndices out;
  const auto train_end = perm.begin() + static_cast<std::ptrdiff_t>(n_train);
  const auto val_end = train_end + static_cast<std::ptrdiff_t>(n_val);
  out.train.assign(perm.begin(), train_end);
  out.val.assign(train_end, val_end);
  out.test.assign(val_end, perm.end());
  return out;
}

DatasetSplit split_dataset(const EmbeddingDataset& dataset,
                           const SplitSpec& spec) {
  const auto idx = split_indices(dataset.size(), spec);
  return {take_records(dataset, idx.train), take_records(dataset, idx.val),
          take_records(dataset, idx.test)};
}

EmbeddingDataset subsample(const EmbeddingDataset& dataset, std::size_t n,
                           std::uint64_t seed) {
  if (n > dataset.size()) {
    throw std::invalid_argument("subsample size " + std::to_string(n) +
                                " exceeds dataset size " +
                                std::to_string(dataset.size()));
  }
  std::vector<std::size_t> perm(dataset.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(perm));
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  return take_records(dataset, perm);
}

std::optional<AgeClass> bin_age(int age) {
  if (age < 0) throw std::invalid_argument("negative age");
  if (age < 35) return AgeClass::kYoung;
  if (age > 45) return AgeClass::kOld;
  return std::nullopt;
}

LabelSchema age_schema() { return LabelSchema{{"Young", "Old"}}; }

}  // namespace socioprobe
