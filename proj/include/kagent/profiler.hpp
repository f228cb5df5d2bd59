#pragma once

#include "kagent/error.hpp"
#include "kagent/task.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kagent {

KAGENT_DEFINE_ERROR(ProfileError, Error);

class MissingColumn : public ProfileError {
public:
    explicit MissingColumn(std::vector<std::string> names);
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
};

KAGENT_DEFINE_ERROR(UnparseableValue, ProfileError);

// Structured view of one profiled kernel launch. Percentages are of peak.
struct ProfileSummary {
    std::array<std::int64_t, 3> grid_dims{1, 1, 1};
    std::array<std::int64_t, 3> block_dims{1, 1, 1};
    std::int64_t registers_per_thread = 0;
    std::int64_t static_smem_bytes = 0;
    std::int64_t dynamic_smem_bytes = 0;
    double duration_us = 0.0;
    double achieved_occupancy_pct = 0.0;
    double memory_throughput_pct = 0.0;
    double compute_throughput_pct = 0.0;
    std::vector<std::string> diagnostics;

    bool operator==(const ProfileSummary&) const = default;
};

// Exact column names of the flat export the harness writes.
inline constexpr std::array<std::string_view, 13> kProfileColumns = {
    "grid_x",      "grid_y",          "grid_z",          "block_x",
    "block_y",     "block_z",         "regs_per_thread", "static_smem",
    "dynamic_smem", "duration_us",    "achieved_occupancy_pct", "mem_throughput_pct",
    "compute_throughput_pct"};

// Bottleneck thresholds, in percent of peak.
struct DiagnosticThresholds {
    double memory_bound_mem_above = 80.0;
    double bound_compute_below = 40.0;
    double latency_bound_mem_below = 40.0;
    double occupancy_limited_below = 50.0;
};

inline constexpr std::string_view kMemoryBoundFinding =
    "memory-bound: memory throughput is high while compute throughput is low";
inline constexpr std::string_view kLatencyBoundFinding =
    "latency-bound: both memory and compute throughput are low";
inline constexpr std::string_view kOccupancyLimitedFinding =
    "occupancy-limited: achieved occupancy is below 50%";

std::vector<std::string> diagnose(const ProfileSummary& summary, const DiagnosticThresholds& thresholds = {});

// One header row, one row per kernel launch. The launch with the largest
// duration_us is summarized; extra columns are ignored.
ProfileSummary parse_profile(std::string_view csv);

// Fixed layout, at most kMaxSummaryLines lines.
inline constexpr std::size_t kMaxSummaryLines = 40;
std::string summarize_for_prompt(const ProfileSummary& summary);

struct ProfilingSchedule {
    int matmul_start_depth = 11;
    int activation_start_depth = 1;
    int other_start_depth = 1;

    int start_depth(WorkloadClass c) const;
    bool operator==(const ProfilingSchedule&) const = default;
};

// Consulted only for optimization iterations, so depth >= 1.
bool profiling_enabled(WorkloadClass c, int depth, const ProfilingSchedule& schedule);

nlohmann::json to_json(const ProfileSummary& s);
ProfileSummary profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProfilingSchedule& s);
ProfilingSchedule schedule_from_json(const nlohmann::json& j);

} // namespace kagent
