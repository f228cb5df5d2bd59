#pragma once

#include "kagent/evaluator.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace kagent {

// Scripted executor for desk-scale runs: hands out canned replies in order,
// stamping each with the job's id. When a job asks for profiling and a CSV
// fixture is configured, the reply points at it.
class MockExecutor final : public Executor {
public:
    MockExecutor(std::vector<nlohmann::json> replies, std::optional<std::string> profile_csv = std::nullopt,
                 bool repeat_last = false);

    // {"replies": [...], "profile_csv": "<path relative to the file>", "repeat_last": false}
    static MockExecutor from_file(const std::string& path);

    nlohmann::json run(const nlohmann::json& job, std::chrono::milliseconds timeout) override;

    const std::vector<nlohmann::json>& jobs() const { return jobs_; }

private:
    std::vector<nlohmann::json> replies_;
    std::optional<std::string> profile_csv_;
    bool repeat_last_;
    std::size_t next_ = 0;
    std::vector<nlohmann::json> jobs_;
};

// Spawns `argv` per job, writes the job to its stdin and reads one JSON reply
// from its stdout. Exit status 0 is required for a reply to count.
class SubprocessExecutor final : public Executor {
public:
    explicit SubprocessExecutor(std::vector<std::string> argv);

    nlohmann::json run(const nlohmann::json& job, std::chrono::milliseconds timeout) override;

private:
    std::vector<std::string> argv_;
};

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
    std::string err;
};

// fork/exec with stdin fed from `input`; kills the child at the deadline.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& input,
                          std::chrono::milliseconds timeout);

} // namespace kagent
