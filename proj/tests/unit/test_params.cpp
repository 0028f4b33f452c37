#include <doctest.h>

#include <cmath>
#include <fstream>

#include "sfn/error.hpp"
#include "sfn/io.hpp"
#include "sfn/layers.hpp"
#include "sfn/model.hpp"
#include "sfn/params.hpp"
#include "temp_dir.hpp"

using namespace sfn;

namespace {

std::vector<ParamSpec> small_specs() {
  return {{"w", {4, 3}, ParamInit::fan_in_uniform, 4},
          {"b", {3}, ParamInit::zeros, 4},
          {"g", {3}, ParamInit::ones, 1}};
}

}  // namespace

TEST_SUITE("params") {
  TEST_CASE("store layout and counts") {
    ParamStore<float> s(small_specs());
    CHECK(s.size() == 3);
    CHECK(s.value("b").rows() == 1);
    CHECK(s.value("b").cols() == 3);
    CHECK(s.parameter_count() == 12 + 3 + 3);
    CHECK(s.parameter_count("w") == 12);
    CHECK_THROWS_AS(s.index("nope"), Error);
    CHECK_THROWS_AS(ParamStore<float>({{"x", {1}}, {"x", {2}}}), Error);
    CHECK_THROWS_AS(ParamStore<float>({{"x", {1, 2, 3}}}), Error);
  }

  TEST_CASE("initialisation follows the declared scheme and is seeded per name") {
    const auto a = init_params<float>(small_specs(), 5);
    const auto b = init_params<float>(small_specs(), 5);
    const auto c = init_params<float>(small_specs(), 6);
    CHECK(a.value("w") == b.value("w"));
    CHECK(a.value("w") != c.value("w"));
    CHECK(a.value("w").cwiseAbs().maxCoeff() <= 0.5f);
    CHECK(a.value("b").isZero());
    CHECK(a.value("g").isOnes());
    // Adding an unrelated parameter leaves existing draws unchanged.
    auto specs = small_specs();
    specs.insert(specs.begin(), ParamSpec{"extra", {7, 7}, ParamInit::fan_in_uniform, 7});
    CHECK(init_params<float>(specs, 5).value("w") == a.value("w"));
  }

  TEST_CASE("checkpoints round-trip and reject mismatches") {
    TempDir dir("params");
    const auto p = init_params<float>(small_specs(), 9);
    const auto file = dir.path / "m.sfnc";
    save_checkpoint(file, p, 1234);
    CHECK(read_checkpoint_digest(file) == 1234);
    const auto back = load_checkpoint(file, small_specs(), 1234);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(back.value(i) == p.value(i));

    auto code = [](auto&& f) {
      try {
        f();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::runtime;
    };
    CHECK(code([&] { load_checkpoint(file, small_specs(), 99); }) == ErrorCode::format);
    auto other = small_specs();
    other[0].shape = {3, 4};
    CHECK(code([&] { load_checkpoint(file, other, 1234); }) == ErrorCode::format);
    other = small_specs();
    other.push_back({"missing", {2}});
    CHECK(code([&] { load_checkpoint(file, other, 1234); }) == ErrorCode::format);
    write_text(dir.path / "junk.sfnc", "JUNKJUNKJUNK");
    CHECK(code([&] { read_checkpoint_digest(dir.path / "junk.sfnc"); }) == ErrorCode::format);
    CHECK(code([&] { read_checkpoint_digest(dir.path / "none.sfnc"); }) == ErrorCode::io);
    std::filesystem::resize_file(file, std::filesystem::file_size(file) - 3);
    CHECK(code([&] { load_checkpoint(file, small_specs(), 1234); }) == ErrorCode::format);
  }

  TEST_CASE("layer declarations have the textbook shapes") {
    std::vector<ParamSpec> specs;
    declare_linear(specs, "l.", 5, 7);
    declare_conv1d(specs, "c.", 4, 6, 3);
    declare_attention(specs, "a.", 8);
    declare_layer_norm(specs, "n.", 8);
    ParamStore<float> s(specs);
    CHECK(s.parameter_count("l.") == 5 * 7 + 7);
    CHECK(s.parameter_count("c.") == 3 * 4 * 6 + 6);
    CHECK(s.parameter_count("a.") == 4 * (8 * 8 + 8));
    CHECK(s.parameter_count("n.") == 16);
  }
}
