#include "kagent/error.hpp"
#include "kagent/task.hpp"
#include "kagent/text.hpp"

#include "support/testing.hpp"

#include <doctest.h>

using namespace kagent;
using kagent::testing::TempDir;

namespace {

std::string write_manifest(const TempDir& dir, const std::string& body)
{
    write_file_atomic(dir / "ref.py", "class Model: pass\n");
    write_file_atomic(dir / "task.json", body);
    return dir / "task.json";
}

} // namespace

TEST_CASE("load_manifest reads the bundled matmul task")
{
    auto t = load_manifest(kagent::testing::fixture("sessions/matmul_square/manifest.json"));
    CHECK(t.task_id == "matmul_square");
    CHECK(t.display_name() == "Square MatMul");
    CHECK(t.workload_class == WorkloadClass::MatMulLike);
    REQUIRE(t.inputs.size() == 2);
    CHECK(t.inputs[0].shape == std::vector<std::int64_t>{2048, 2048});
    CHECK(t.reference_source.find("torch.matmul") != std::string::npos);
}

TEST_CASE("task overrides win over session defaults")
{
    TempDir dir;
    auto path = write_manifest(dir, R"({"task_id": "t", "workload_class": "activation",
        "reference_source_path": "ref.py",
        "inputs": [{"shape": [8], "dtype": "f16", "distribution": "uniform"}],
        "correctness": {"rtol": 0.01, "seed": 7}, "timing": {"timed_iters": 5}})");
    auto t = load_manifest(path);
    CHECK(t.inputs[0].dtype == DType::F16);
    CHECK(t.inputs[0].distribution == Distribution::Uniform);
    auto cc = t.correctness({});
    CHECK(cc.rtol == 0.01);
    CHECK(cc.atol == 1e-3);
    CHECK(cc.rng_seed == 7);
    auto tc = t.timing({});
    CHECK(tc.timed_iters == 5);
    CHECK(tc.warmup_iters == 10);
    CHECK(task_from_json(to_json(t)).correctness({}) == cc);
}

TEST_CASE("manifest errors name the file and line")
{
    TempDir dir;
    auto path = write_manifest(dir, "{\n  \"task_id\": \"t\",\n  oops\n}\n");
    try {
        load_manifest(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(path + ":3:") != std::string::npos);
    }
}

TEST_CASE("manifest validation")
{
    TempDir dir;
    auto bad = [&](const std::string& body) { return write_manifest(dir, body); };
    CHECK_THROWS_AS(load_manifest(bad(R"({"task_id": "t", "reference_source_path": "ref.py",
        "inputs": [{"shape": [0, 4]}]})")), ConfigError);
    CHECK_THROWS_AS(load_manifest(bad(R"({"task_id": "t", "reference_source_path": "ref.py", "inputs": []})")),
                    ConfigError);
    CHECK_THROWS_AS(load_manifest(bad(R"({"task_id": "t", "reference_source_path": "nope.py",
        "inputs": [{"shape": [4]}]})")), ConfigError);
    CHECK_THROWS_AS(load_manifest(bad(R"({"task_id": "t", "workload_class": "conv",
        "reference_source_path": "ref.py", "inputs": [{"shape": [4]}]})")), ConfigError);
    CHECK_THROWS_AS(load_manifest(bad(R"({"task_id": "t", "reference_source_path": "ref.py",
        "inputs": [{"shape": [4]}], "timing": {"warmup_iters": 0}})")), ConfigError);
    CHECK_THROWS_AS(load_manifest(dir / "absent.json"), ConfigError);
}

TEST_CASE("config validation")
{
    CHECK_NOTHROW(validate(CorrectnessConfig{}));
    CHECK_THROWS_AS(validate(CorrectnessConfig{0.0, 1e-3, 5, 1}), ConfigError);
    CHECK_THROWS_AS(validate(CorrectnessConfig{1e-3, 1e-3, 0, 1}), ConfigError);
    CHECK_THROWS_AS(validate(TimingConfig{1, 0, true}), ConfigError);
    CHECK(correctness_from_json(to_json(CorrectnessConfig{0.5, 0.25, 3, 42})) == CorrectnessConfig{0.5, 0.25, 3, 42});
    CHECK(timing_from_json(to_json(TimingConfig{2, 3, false})) == TimingConfig{2, 3, false});
}
