#pragma once

#include "kagent/profiler.hpp"
#include "kagent/workflow.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace kagent {

inline constexpr int kExitDone = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitFailed = 2;

struct RunArgs {
    std::string manifest_path;
    std::string executor = "mock";         // mock[:<fixture>] | subprocess:<path>
    std::string executor_fixture;          // replies file when executor is plain "mock"
    std::string model;                     // scripted:<path> | remote
    std::string model_endpoint;
    std::string model_name;
    std::string out_dir;
    std::string session_id;                // defaults to the task id
    std::string asset_dir;                 // defaults to default_asset_dir()
    std::optional<std::uint64_t> seed;
    Budget budget;
    ProfilingSchedule schedule;
    double regression_factor = 0.5;
    bool allow_regeneration_fallback = false;
    bool quiet = false;
};

// 0 on Done, 2 on Failed, 1 on configuration errors.
int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

// 0 iff the re-run reproduces the stored record (timestamps aside).
int cmd_replay(const std::string& session_dir, const std::string& out_dir, std::ostream& out, std::ostream& err);

int cmd_report(const std::string& session_dir, const std::string& format, std::ostream& out, std::ostream& err);

// One row per session directory matching `pattern` (glob(3) syntax) that
// holds a record.json, ordered by path.
int cmd_bench_table(const std::string& pattern, std::ostream& out, std::ostream& err);

// Flag parsing for the kagent executable; `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace kagent
