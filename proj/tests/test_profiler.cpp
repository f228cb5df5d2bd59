#include "kagent/profiler.hpp"
#include "kagent/text.hpp"

#include "support/testing.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <random>

using namespace kagent;

namespace {

ProfileSummary parse_fixture(const std::string& name)
{
    return parse_profile(read_file(kagent::testing::fixture("profiles/" + name)));
}

std::string header()
{
    std::string h;
    for (auto c : kProfileColumns) {
        if (!h.empty())
            h += ',';
        h += c;
    }
    return h + "\n";
}

} // namespace

TEST_CASE("bundled fixture parses field-exactly from its longest launch")
{
    auto s = parse_fixture("profile.csv");
    CHECK(s.grid_dims == std::array<std::int64_t, 3>{128, 64, 1});
    CHECK(s.block_dims == std::array<std::int64_t, 3>{16, 16, 1});
    CHECK(s.registers_per_thread == 40);
    CHECK(s.static_smem_bytes == 8192);
    CHECK(s.dynamic_smem_bytes == 1024);
    CHECK(s.duration_us == 1234.5);
    CHECK(s.achieved_occupancy_pct == 62.5);
    CHECK(s.memory_throughput_pct == 71.3);
    CHECK(s.compute_throughput_pct == 55.8);
    CHECK(s.diagnostics.empty());
}

TEST_CASE("boundary fixtures trigger exactly their finding")
{
    CHECK(parse_fixture("memory_bound.csv").diagnostics == std::vector<std::string>{std::string(kMemoryBoundFinding)});
    CHECK(parse_fixture("latency_bound.csv").diagnostics ==
          std::vector<std::string>{std::string(kLatencyBoundFinding)});
    CHECK(parse_fixture("occupancy_limited.csv").diagnostics ==
          std::vector<std::string>{std::string(kOccupancyLimitedFinding)});
}

TEST_CASE("thresholds are strict")
{
    ProfileSummary s;
    s.achieved_occupancy_pct = 50.0;
    s.memory_throughput_pct = 80.0;
    s.compute_throughput_pct = 40.0;
    CHECK(diagnose(s).empty());
    s.memory_throughput_pct = 40.0;
    s.compute_throughput_pct = 39.0;
    CHECK(diagnose(s).empty());
    s.memory_throughput_pct = 39.999;
    CHECK(diagnose(s) == std::vector<std::string>{std::string(kLatencyBoundFinding)});
    s.achieved_occupancy_pct = 49.999;
    CHECK(diagnose(s).size() == 2);
}

TEST_CASE("missing column is reported by its schema name")
{
    try {
        parse_fixture("missing_duration.csv");
        FAIL("expected MissingColumn");
    } catch (const MissingColumn& e) {
        CHECK(e.names() == std::vector<std::string>{"duration_us"});
    }
}

TEST_CASE("malformed exports are rejected")
{
    auto h = header();
    CHECK_THROWS_AS(parse_profile(""), ProfileError);
    CHECK_THROWS_AS(parse_profile(h), ProfileError);
    CHECK_THROWS_AS(parse_profile(h + "1,1,1,32,1,1,8,0,0,fast,50,50,50\n"), UnparseableValue);
    CHECK_THROWS_AS(parse_profile(h + "1,1,1,32,1,1,8,0,0,3.0,50,150,50\n"), UnparseableValue);
    CHECK_THROWS_AS(parse_profile(h + "0,1,1,32,1,1,8,0,0,3.0,50,50,50\n"), UnparseableValue);
    CHECK_THROWS_AS(parse_profile(h + "1,1,1,32,1,1,8,0\n"), UnparseableValue);
}

TEST_CASE("column order and quoting do not matter")
{
    auto csv = "compute_throughput_pct,mem_throughput_pct,achieved_occupancy_pct,duration_us,dynamic_smem,"
               "static_smem,regs_per_thread,block_z,block_y,block_x,grid_z,grid_y,grid_x,extra\n"
               "\"10\",20,30,\"2,000.25\",0,0,64,1,1,\"1,024\",1,2,3,ignored\n";
    auto s = parse_profile(csv);
    CHECK(s.grid_dims == std::array<std::int64_t, 3>{3, 2, 1});
    CHECK(s.block_dims[0] == 1024);
    CHECK(s.duration_us == 2000.25);
    CHECK(s.compute_throughput_pct == 10.0);
}

TEST_CASE("property: parse recovers generated values and the summary shows them")
{
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> dim(1, 4096);
    std::uniform_real_distribution<double> pct(0.0, 100.0), dur(0.1, 1e5);
    for (int i = 0; i < 300; ++i) {
        ProfileSummary want;
        want.grid_dims = {dim(rng), dim(rng), dim(rng) % 4 + 1};
        want.block_dims = {dim(rng) % 1024 + 1, dim(rng) % 8 + 1, 1};
        want.registers_per_thread = dim(rng) % 255 + 1;
        want.static_smem_bytes = dim(rng) * 8;
        want.dynamic_smem_bytes = dim(rng) % 2 ? 0 : dim(rng) * 4;
        want.duration_us = dur(rng);
        want.achieved_occupancy_pct = pct(rng);
        want.memory_throughput_pct = pct(rng);
        want.compute_throughput_pct = pct(rng);
        want.diagnostics = diagnose(want);
        auto row = fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", want.grid_dims[0], want.grid_dims[1],
                               want.grid_dims[2], want.block_dims[0], want.block_dims[1], want.block_dims[2],
                               want.registers_per_thread, want.static_smem_bytes, want.dynamic_smem_bytes,
                               want.duration_us, want.achieved_occupancy_pct, want.memory_throughput_pct,
                               want.compute_throughput_pct);
        // a shorter launch alongside must not win
        auto got = parse_profile(header() + "1,1,1,1,1,1,1,0,0,0.01,1,1,1\n" + row);
        REQUIRE(got == want);
        REQUIRE(profile_from_json(to_json(got)) == got);

        auto text = summarize_for_prompt(got);
        CHECK(count_occurrences(text, "\n") <= 40);
        for (auto v : {fmt::format("({}, {}, {})", want.grid_dims[0], want.grid_dims[1], want.grid_dims[2]),
                       fmt::format("({}, {}, {})", want.block_dims[0], want.block_dims[1], want.block_dims[2]),
                       fmt::format("{}", want.registers_per_thread), fmt::format("{}", want.static_smem_bytes),
                       fmt::format("{}", want.dynamic_smem_bytes), fmt::format("{}", want.duration_us),
                       fmt::format("{}", want.achieved_occupancy_pct), fmt::format("{}", want.memory_throughput_pct),
                       fmt::format("{}", want.compute_throughput_pct)})
            REQUIRE(text.find(v) != std::string::npos);
        for (const auto& d : want.diagnostics)
            REQUIRE(text.find(d) != std::string::npos);
    }
}

TEST_CASE("profiling gate follows the per-class start depth")
{
    ProfilingSchedule def;
    for (int d = 1; d <= 10; ++d)
        CHECK_FALSE(profiling_enabled(WorkloadClass::MatMulLike, d, def));
    CHECK(profiling_enabled(WorkloadClass::MatMulLike, 11, def));
    CHECK(profiling_enabled(WorkloadClass::ActivationElementwise, 1, def));
    CHECK(profiling_enabled(WorkloadClass::Other, 1, def));
    CHECK_THROWS_AS(profiling_enabled(WorkloadClass::Other, 0, def), Error);
    CHECK(schedule_from_json(to_json(ProfilingSchedule{5, 2, 3})) == ProfilingSchedule{5, 2, 3});
}

TEST_CASE("property: the gate never switches off once on")
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        ProfilingSchedule s{1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 20),
                            1 + static_cast<int>(rng() % 20)};
        for (auto c : {WorkloadClass::MatMulLike, WorkloadClass::ActivationElementwise, WorkloadClass::Other}) {
            bool seen = false;
            for (int d = 1; d <= 30; ++d) {
                bool on = profiling_enabled(c, d, s);
                REQUIRE((!seen || on));
                seen = seen || on;
            }
        }
    }
}
