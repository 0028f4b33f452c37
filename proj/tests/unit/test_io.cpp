#include <doctest.h>

#include <fstream>

#include "sfn/error.hpp"
#include "sfn/io.hpp"
#include "temp_dir.hpp"

using namespace sfn;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::runtime;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("feature files round-trip bit for bit") {
    TempDir dir("io");
    FeatureMatrix m(3, 4);
    m << 1.5f, -2.f, 0.f, 1e-8f, 3.f, 4.f, 5.f, 6.f, -0.f, 7.25f, 8.f, 9.f;
    write_features(dir.path / "a.sfnf", m);
    const FeatureMatrix back = read_features(dir.path / "a.sfnf");
    CHECK(back == m);
    // Header: magic, version, rows, cols; then 12 floats.
    CHECK(std::filesystem::file_size(dir.path / "a.sfnf") == 4 + 4 + 4 + 4 + 12 * 4);
  }

  TEST_CASE("bad feature files report format and io errors") {
    TempDir dir("io");
    write_text(dir.path / "bad.sfnf", "NOPE and some bytes");
    CHECK(code_of([&] { read_features(dir.path / "bad.sfnf"); }) == ErrorCode::format);
    CHECK(code_of([&] { read_features(dir.path / "missing.sfnf"); }) == ErrorCode::io);
    FeatureMatrix m = FeatureMatrix::Ones(4, 4);
    write_features(dir.path / "t.sfnf", m);
    std::filesystem::resize_file(dir.path / "t.sfnf", 30);
    CHECK(code_of([&] { read_features(dir.path / "t.sfnf"); }) == ErrorCode::format);
  }

  TEST_CASE("manifests round-trip") {
    TempDir dir("io");
    std::vector<ManifestEntry> in{{"a", "action_00", "features/a.sfnf", {{0, 4}, {4, 9}}, std::nullopt},
                                  {"b", "action_01", "features/b.sfnf", {}, std::string("ex")}};
    write_manifest(dir.path / "m.jsonl", in);
    const auto out = read_manifest(dir.path / "m.jsonl");
    REQUIRE(out.size() == 2);
    CHECK(out[0].cycles == in[0].cycles);
    CHECK_FALSE(out[0].exemplar_id.has_value());
    CHECK(out[1].exemplar_id == std::optional<std::string>("ex"));
    CHECK(out[1].class_label == "action_01");
  }

  TEST_CASE("malformed manifest lines name the line") {
    TempDir dir("io");
    write_text(dir.path / "m.jsonl", "{\"id\":\"a\",\"class\":\"x\",\"features_file\":\"f\",\"cycles\":[]}\n\n{oops\n");
    try {
      read_manifest(dir.path / "m.jsonl");
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::format);
      CHECK(std::string(e.what()).find("m.jsonl:3") != std::string::npos);
    }
  }

  TEST_CASE("loading rejects annotations outside the sequence") {
    TempDir dir("io");
    AnnotatedSequence s;
    s.id = "s";
    s.class_label = "c";
    s.features = FeatureMatrix::Zero(10, 2);
    ManifestEntry e = store_sequence(dir.path, s);
    e.cycles = {{5, 12}};
    write_manifest(dir.path / "m.jsonl", {e});
    CHECK(code_of([&] { load_dataset(dir.path / "m.jsonl"); }) == ErrorCode::invalid_argument);
  }

  TEST_CASE("items referencing missing exemplars fail to load") {
    TempDir dir("io");
    AnnotatedSequence s;
    s.id = "s";
    s.class_label = "c";
    s.features = FeatureMatrix::Zero(4, 2);
    write_manifest(dir.path / "m.jsonl", {store_sequence(dir.path, s, std::string("gone"))});
    CHECK(code_of([&] { load_counting_set(dir.path / "m.jsonl"); }) == ErrorCode::io);
    write_manifest(dir.path / "exemplars.jsonl", {store_sequence(dir.path, s)});
    CHECK(code_of([&] { load_counting_set(dir.path / "m.jsonl"); }) == ErrorCode::format);
  }
}
