#include "kagent/profiler.hpp"

#include "kagent/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <map>

namespace kagent {

using nlohmann::json;

MissingColumn::MissingColumn(std::vector<std::string> names)
    : ProfileError("missing profile column(s): " + fmt::format("{}", fmt::join(names, ", "))),
      names_(std::move(names))
{
}

namespace {

std::vector<std::string> split_csv_row(std::string_view row)
{
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < row.size(); ++i) {
        char c = row[i];
        if (quoted) {
            if (c == '"' && i + 1 < row.size() && row[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    for (auto& c : cells) {
        auto b = c.find_first_not_of(" \t\r");
        auto e = c.find_last_not_of(" \t\r");
        c = b == std::string::npos ? std::string{} : c.substr(b, e - b + 1);
    }
    return cells;
}

// Vendor exports group digits inside quoted cells ("1,024").
std::string strip_grouping(std::string s)
{
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    return s;
}

double to_double(const std::string& raw, std::string_view column, std::size_t row)
{
    auto s = strip_grouping(raw);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw UnparseableValue(fmt::format("row {}: column {} has non-numeric value '{}'", row, column, raw));
    return v;
}

std::int64_t to_int(const std::string& raw, std::string_view column, std::size_t row)
{
    auto s = strip_grouping(raw);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw UnparseableValue(fmt::format("row {}: column {} has non-integer value '{}'", row, column, raw));
    return v;
}

void check_percent(double v, std::string_view column, std::size_t row)
{
    if (!(v >= 0.0 && v <= 100.0))
        throw UnparseableValue(fmt::format("row {}: column {} = {} is outside [0, 100]", row, column, v));
}

} // namespace

std::vector<std::string> diagnose(const ProfileSummary& s, const DiagnosticThresholds& t)
{
    std::vector<std::string> out;
    if (s.memory_throughput_pct > t.memory_bound_mem_above && s.compute_throughput_pct < t.bound_compute_below)
        out.emplace_back(kMemoryBoundFinding);
    if (s.memory_throughput_pct < t.latency_bound_mem_below && s.compute_throughput_pct < t.bound_compute_below)
        out.emplace_back(kLatencyBoundFinding);
    if (s.achieved_occupancy_pct < t.occupancy_limited_below)
        out.emplace_back(kOccupancyLimitedFinding);
    return out;
}

ProfileSummary parse_profile(std::string_view csv)
{
    auto lines = split_lines(csv).lines;
    std::erase_if(lines, [](const std::string& l) { return l.find_first_not_of(" \t\r") == std::string::npos; });
    if (lines.empty())
        throw ProfileError("profile export is empty");

    auto header = split_csv_row(lines[0]);
    std::map<std::string_view, std::size_t> index;
    std::vector<std::string> missing;
    for (auto name : kProfileColumns) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            missing.emplace_back(name);
        else
            index[name] = static_cast<std::size_t>(it - header.begin());
    }
    if (!missing.empty())
        throw MissingColumn(std::move(missing));
    if (lines.size() < 2)
        throw ProfileError("profile export has a header but no kernel rows");

    std::optional<ProfileSummary> best;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto cells = split_csv_row(lines[r]);
        auto cell = [&](std::string_view name) -> const std::string& {
            auto i = index.at(name);
            if (i >= cells.size())
                throw UnparseableValue(fmt::format("row {}: too few cells for column {}", r, name));
            return cells[i];
        };
        ProfileSummary s;
        s.grid_dims = {to_int(cell("grid_x"), "grid_x", r), to_int(cell("grid_y"), "grid_y", r),
                       to_int(cell("grid_z"), "grid_z", r)};
        s.block_dims = {to_int(cell("block_x"), "block_x", r), to_int(cell("block_y"), "block_y", r),
                        to_int(cell("block_z"), "block_z", r)};
        for (auto d : s.grid_dims)
            if (d <= 0)
                throw UnparseableValue(fmt::format("row {}: grid dimensions must be positive", r));
        for (auto d : s.block_dims)
            if (d <= 0)
                throw UnparseableValue(fmt::format("row {}: block dimensions must be positive", r));
        s.registers_per_thread = to_int(cell("regs_per_thread"), "regs_per_thread", r);
        s.static_smem_bytes = to_int(cell("static_smem"), "static_smem", r);
        s.dynamic_smem_bytes = to_int(cell("dynamic_smem"), "dynamic_smem", r);
        s.duration_us = to_double(cell("duration_us"), "duration_us", r);
        s.achieved_occupancy_pct = to_double(cell("achieved_occupancy_pct"), "achieved_occupancy_pct", r);
        s.memory_throughput_pct = to_double(cell("mem_throughput_pct"), "mem_throughput_pct", r);
        s.compute_throughput_pct = to_double(cell("compute_throughput_pct"), "compute_throughput_pct", r);
        check_percent(s.achieved_occupancy_pct, "achieved_occupancy_pct", r);
        check_percent(s.memory_throughput_pct, "mem_throughput_pct", r);
        check_percent(s.compute_throughput_pct, "compute_throughput_pct", r);
        if (!best || s.duration_us > best->duration_us)
            best = std::move(s);
    }
    best->diagnostics = diagnose(*best);
    return *best;
}

std::string summarize_for_prompt(const ProfileSummary& s)
{
    std::vector<std::string> lines;
    lines.push_back("Launch configuration:");
    lines.push_back(fmt::format("  grid: ({}, {}, {})", s.grid_dims[0], s.grid_dims[1], s.grid_dims[2]));
    lines.push_back(fmt::format("  block: ({}, {}, {})", s.block_dims[0], s.block_dims[1], s.block_dims[2]));
    lines.push_back(fmt::format("  registers per thread: {}", s.registers_per_thread));
    lines.push_back(fmt::format("  shared memory: static {} bytes, dynamic {} bytes", s.static_smem_bytes,
                                s.dynamic_smem_bytes));
    lines.push_back("Timing:");
    lines.push_back(fmt::format("  kernel duration: {} us", s.duration_us));
    lines.push_back("Utilization (% of peak):");
    lines.push_back(fmt::format("  achieved occupancy: {}", s.achieved_occupancy_pct));
    lines.push_back(fmt::format("  memory throughput: {}", s.memory_throughput_pct));
    lines.push_back(fmt::format("  compute throughput: {}", s.compute_throughput_pct));
    lines.push_back("Diagnostics:");
    if (s.diagnostics.empty())
        lines.push_back("  - none");
    for (const auto& d : s.diagnostics) {
        if (lines.size() + 1 >= kMaxSummaryLines) {
            lines.push_back("  - (further findings omitted)");
            break;
        }
        lines.push_back("  - " + d);
    }
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

int ProfilingSchedule::start_depth(WorkloadClass c) const
{
    switch (c) {
    case WorkloadClass::MatMulLike:
        return matmul_start_depth;
    case WorkloadClass::ActivationElementwise:
        return activation_start_depth;
    case WorkloadClass::Other:
        return other_start_depth;
    }
    return other_start_depth;
}

bool profiling_enabled(WorkloadClass c, int depth, const ProfilingSchedule& schedule)
{
    if (depth < 1)
        throw Error(fmt::format("profiling schedule consulted at depth {}; optimization depths start at 1", depth));
    return depth >= schedule.start_depth(c);
}

json to_json(const ProfileSummary& s)
{
    return {{"grid_dims", s.grid_dims},
            {"block_dims", s.block_dims},
            {"registers_per_thread", s.registers_per_thread},
            {"static_smem_bytes", s.static_smem_bytes},
            {"dynamic_smem_bytes", s.dynamic_smem_bytes},
            {"duration_us", s.duration_us},
            {"achieved_occupancy_pct", s.achieved_occupancy_pct},
            {"memory_throughput_pct", s.memory_throughput_pct},
            {"compute_throughput_pct", s.compute_throughput_pct},
            {"diagnostics", s.diagnostics}};
}

ProfileSummary profile_from_json(const json& j)
{
    ProfileSummary s;
    s.grid_dims = j.at("grid_dims").get<std::array<std::int64_t, 3>>();
    s.block_dims = j.at("block_dims").get<std::array<std::int64_t, 3>>();
    s.registers_per_thread = j.at("registers_per_thread").get<std::int64_t>();
    s.static_smem_bytes = j.at("static_smem_bytes").get<std::int64_t>();
    s.dynamic_smem_bytes = j.at("dynamic_smem_bytes").get<std::int64_t>();
    s.duration_us = j.at("duration_us").get<double>();
    s.achieved_occupancy_pct = j.at("achieved_occupancy_pct").get<double>();
    s.memory_throughput_pct = j.at("memory_throughput_pct").get<double>();
    s.compute_throughput_pct = j.at("compute_throughput_pct").get<double>();
    s.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return s;
}

json to_json(const ProfilingSchedule& s)
{
    return {{"matmul", s.matmul_start_depth}, {"activation", s.activation_start_depth}, {"other", s.other_start_depth}};
}

ProfilingSchedule schedule_from_json(const json& j)
{
    ProfilingSchedule s;
    s.matmul_start_depth = j.value("matmul", s.matmul_start_depth);
    s.activation_start_depth = j.value("activation", s.activation_start_depth);
    s.other_start_depth = j.value("other", s.other_start_depth);
    return s;
}

} // namespace kagent
