#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "socioprobe/embstore.hpp"
#include "socioprobe/rng.hpp"
#include "test_util.hpp"

using namespace socioprobe;

namespace {

EmbeddingDataset make_dataset(std::size_t n, std::uint32_t layers, std::uint32_t dim,
                              std::uint64_t seed = 1) {
  EmbeddingDataset ds;
  ds.schema.class_names = {"Man", "Woman"};
  ds.num_layers = layers;
  ds.dim = dim;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingRecord r;
    r.id = "rec-" + std::to_string(i);
    r.label = static_cast<std::uint32_t>(rng.bounded(2));
    for (std::size_t j = 0; j < std::size_t{layers} * dim; ++j) {
      r.values.push_back(static_cast<float>(rng.normal()));
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

std::set<std::string> ids(const EmbeddingDataset& ds) {
  std::set<std::string> out;
  for (const auto& r : ds.records) out.insert(r.id);
  return out;
}

}  // namespace

TEST_CASE("rng matches the published splitmix64 sequence") {
  std::uint64_t state = 0;
  CHECK(splitmix64_next(state) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64_next(state) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("rng draws match the independent oracle") {
  Rng rng(42);
  oracle::Xoshiro ref(42);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next() == ref());
  CHECK(derive_seed(7, 3) == oracle::child_seed(7, 3));
}

TEST_CASE("empty dataset round-trips with its shape") {
  testing::TempDir dir;
  EmbeddingDataset ds;
  ds.schema.class_names = {"Young", "Old"};
  ds.num_layers = 12;
  ds.dim = 768;
  write_dataset(ds, dir.path() / "e.speb");
  const auto back = read_dataset(dir.path() / "e.speb");
  CHECK(back.empty());
  CHECK(back.num_layers == 12);
  CHECK(back.dim == 768);
  CHECK(back.schema.num_classes() == 2);
}

TEST_CASE("round trip is bit-exact") {
  testing::TempDir dir;
  auto ds = make_dataset(25, 3, 5);
  ds.records[0].values[0] = -0.0f;
  ds.records[1].values[1] = 1e-42f;  // subnormal
  write_dataset(ds, dir.path() / "a.speb");
  const auto back = read_dataset(dir.path() / "a.speb");
  REQUIRE(back == ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(std::memcmp(back.records[i].values.data(), ds.records[i].values.data(),
                      ds.records[i].values.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("zero vector payload is eight zero bytes after the header") {
  EmbeddingDataset ds;
  ds.schema.class_names = {"a", "b"};
  ds.num_layers = 1;
  ds.dim = 2;
  ds.records.push_back({"x", 0, {0.0f, 0.0f}});
  const auto bytes = encode_speb(ds);
  // header: 4 magic + 4*4 + (2+1)*2 names + 8 count; record: 2+1 id + 4 label
  const std::size_t payload_at = 4 + 16 + 6 + 8 + 3 + 4;
  REQUIRE(bytes.size() == payload_at + 8);
  for (std::size_t i = payload_at; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("writes are deterministic and sized per the layout") {
  testing::TempDir dir;
  EmbeddingDataset ds;
  ds.schema.class_names = {"a", "bb"};
  ds.num_layers = 2;
  ds.dim = 4;
  for (int i = 0; i < 3; ++i) {
    ds.records.push_back({"r" + std::to_string(i), static_cast<std::uint32_t>(i % 2),
                          std::vector<float>(8, 0.25f * static_cast<float>(i))});
  }
  write_dataset(ds, dir.path() / "1.speb");
  write_dataset(ds, dir.path() / "2.speb");
  const auto a = read_bytes(dir.path() / "1.speb");
  CHECK(a == read_bytes(dir.path() / "2.speb"));
  // header 4+4+4+4+4 + (2+1) + (2+2) + 8 = 35; per record (2+2) + 4 + 2*4*4 = 40
  CHECK(a.size() == 35 + 3 * 40);
}

TEST_CASE("label out of range is reported at the label's byte offset") {
  std::vector<std::uint8_t> b = {'S', 'P', 'E', 'B'};
  put<std::uint32_t>(b, 1);
  put<std::uint32_t>(b, 1);  // L
  put<std::uint32_t>(b, 1);  // d
  put<std::uint32_t>(b, 2);  // K
  put<std::uint16_t>(b, 1);
  b.push_back('a');
  put<std::uint16_t>(b, 1);
  b.push_back('b');
  put<std::uint64_t>(b, 1);
  put<std::uint16_t>(b, 1);
  b.push_back('x');
  const std::size_t label_at = b.size();
  put<std::uint32_t>(b, 2);
  put<float>(b, 1.0f);
  CHECK(label_at == 37);
  try {
    decode_speb(b);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == label_at);
  }
}

TEST_CASE("malformed containers are rejected with offsets") {
  auto ds = make_dataset(3, 2, 2);
  auto bytes = encode_speb(ds);

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_speb(bytes), FormatError);
  }
  SUBCASE("truncated record stream") {
    bytes.resize(bytes.size() - 3);
    try {
      decode_speb(bytes);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() > 30);
      CHECK(e.offset() <= bytes.size());
    }
  }
  SUBCASE("trailing garbage") {
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_speb(bytes), FormatError);
  }
  SUBCASE("non-finite value") {
    float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
    CHECK_THROWS_AS(decode_speb(bytes), FormatError);
  }
}

TEST_CASE("jsonl debug format is read by extension") {
  testing::TempDir dir;
  const auto ds = make_dataset(4, 2, 3);
  write_dataset_jsonl(ds, dir.path() / "d.jsonl");
  CHECK(read_dataset(dir.path() / "d.jsonl") == ds);

  std::ofstream(dir.path() / "bad.jsonl") << R"({"labels":["a","b"]})" "\n"
                                          << R"({"id":"1","label":"a","layers":[[1,2]]})" "\n"
                                          << R"({"id":"2","label":"a","layers":[[1]]})" "\n";
  try {
    read_dataset(dir.path() / "bad.jsonl");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 3);  // line number
  }
}

TEST_CASE("split sizes follow rounding with remainder to train") {
  const auto ds = make_dataset(10, 1, 1);
  const auto parts = split_dataset(ds, {0.8, 0.1, 0.1, 3});
  CHECK(parts.train.size() == 8);
  CHECK(parts.val.size() == 1);
  CHECK(parts.test.size() == 1);

  const auto odd = split_dataset(make_dataset(17, 1, 1), {0.7, 0.15, 0.15, 3});
  CHECK(odd.val.size() == 3);   // round(2.55)
  CHECK(odd.test.size() == 3);
  CHECK(odd.train.size() == 11);
}

TEST_CASE("split partitions the records and is deterministic") {
  const auto ds = make_dataset(100, 1, 2);
  const SplitSpec spec{0.8, 0.1, 0.1, 7};
  const auto a = split_dataset(ds, spec);
  const auto b = split_dataset(ds, spec);
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.val) == ids(b.val));
  CHECK(ids(a.test) == ids(b.test));

  std::set<std::string> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (const auto& r : part->records) CHECK(all.insert(r.id).second);
  }
  CHECK(all == ids(ds));
}

TEST_CASE("split at seed 7 matches the independent shuffle oracle") {
  const auto ds = make_dataset(100, 1, 1);
  const auto parts = split_dataset(ds, {0.8, 0.1, 0.1, 7});
  const auto perm = oracle::permutation(100, 7);
  for (std::size_t i = 0; i < 80; ++i) CHECK(parts.train.records[i].id == ds.records[perm[i]].id);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(parts.val.records[i].id == ds.records[perm[80 + i]].id);
    CHECK(parts.test.records[i].id == ds.records[perm[90 + i]].id);
  }
}

TEST_CASE("different seeds give different splits") {
  const auto ds = make_dataset(20, 1, 1);
  int differing = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = split_dataset(ds, {0.8, 0.1, 0.1, 2 * s});
    const auto b = split_dataset(ds, {0.8, 0.1, 0.1, 2 * s + 1});
    if (ids(a.test) != ids(b.test) || ids(a.val) != ids(b.val)) ++differing;
  }
  CHECK(differing >= 1);
}

TEST_CASE("split errors name the empty part") {
  const auto ds = make_dataset(4, 1, 1);
  CHECK_THROWS_WITH_AS(split_dataset(ds, {0.8, 0.1, 0.1, 0}), "validation split is empty",
                       std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(ds, {0.5, 0.3, 0.3, 0}), std::invalid_argument);
}

TEST_CASE("subsample edge cases") {
  const auto ds = make_dataset(30, 2, 2);
  SUBCASE("full sample keeps every record unchanged") {
    const auto s = subsample(ds, 30, 5);
    CHECK(ids(s) == ids(ds));
    CHECK(s == ds);  // original relative order is kept
  }
  SUBCASE("empty sample keeps the shape") {
    const auto s = subsample(ds, 0, 5);
    CHECK(s.empty());
    CHECK(s.num_layers == 2);
    CHECK(s.dim == 2);
    CHECK(s.schema == ds.schema);
  }
  SUBCASE("records are copied verbatim") {
    const auto s = subsample(ds, 10, 9);
    for (const auto& r : s.records) {
      auto it = std::find_if(ds.records.begin(), ds.records.end(),
                             [&](const auto& o) { return o.id == r.id; });
      REQUIRE(it != ds.records.end());
      CHECK(*it == r);
    }
    CHECK(subsample(ds, 10, 9) == s);
  }
  CHECK_THROWS_AS(subsample(ds, 31, 0), std::invalid_argument);
}

TEST_CASE("subsampling 20000 of the public-figure domain keeps label proportions") {
  // 133,017 posts, 33.38% / 66.62%.
  EmbeddingDataset ds;
  ds.schema.class_names = {"Man", "Woman"};
  ds.num_layers = 1;
  ds.dim = 1;
  const std::size_t n = 133017;
  const auto men = static_cast<std::size_t>(std::llround(0.3338 * n));
  for (std::size_t i = 0; i < n; ++i) {
    ds.records.push_back({std::to_string(i), i < men ? 0u : 1u, {0.0f}});
  }
  const auto s = subsample(ds, 20000, 2023);
  REQUIRE(s.size() == 20000);
  std::size_t s_men = 0;
  for (const auto& r : s.records) s_men += r.label == 0;
  const double share = static_cast<double>(s_men) / 20000.0;
  CHECK(std::abs(share - 0.3338) <= 0.02);
  CHECK(std::abs((1.0 - share) - 0.6662) <= 0.02);
}

TEST_CASE("age binning") {
  CHECK(bin_age(34) == AgeClass::kYoung);
  CHECK(bin_age(46) == AgeClass::kOld);
  CHECK_FALSE(bin_age(40).has_value());
  CHECK_FALSE(bin_age(35).has_value());
  CHECK_FALSE(bin_age(45).has_value());
  CHECK_THROWS_AS(bin_age(-1), std::invalid_argument);

  int young = 0, old = 0, excluded = 0;
  for (int age = 0; age <= 120; ++age) {
    const auto c = bin_age(age);
    if (!c) ++excluded;
    else if (*c == AgeClass::kYoung) ++young;
    else ++old;
  }
  CHECK(young == 35);
  CHECK(excluded == 11);
  CHECK(old == 75);
  CHECK(age_schema().class_names[static_cast<int>(AgeClass::kOld)] == "Old");
}

TEST_CASE("schema and dataset validation") {
  CHECK_THROWS_AS((LabelSchema{{"a"}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LabelSchema{{"a", "a"}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LabelSchema{{"a", ""}}.validate()), std::invalid_argument);
  auto ds = make_dataset(3, 2, 2);
  ds.records[1].values.pop_back();
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
}
