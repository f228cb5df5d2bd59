#pragma once

#include "kagent/error.hpp"
#include "kagent/profiler.hpp"
#include "kagent/task.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kagent {

KAGENT_DEFINE_ERROR(ExecutorError, Error);
KAGENT_DEFINE_ERROR(ExecutorUnavailable, ExecutorError);
KAGENT_DEFINE_ERROR(ExecutorTimeout, ExecutorError);
KAGENT_DEFINE_ERROR(ProtocolViolation, ExecutorError);
KAGENT_DEFINE_ERROR(NonPositiveTime, Error);
KAGENT_DEFINE_ERROR(EmptySamples, Error);

enum class EvalStatus { CompileError, RuntimeError, Mismatch, Correct };

std::string_view to_string(EvalStatus s);      // CompileError, ...
std::string_view wire_status(EvalStatus s);    // compile_error, ...
EvalStatus parse_wire_status(std::string_view s);

// Present only on Correct reports.
struct EvalTiming {
    double candidate_time = 0.0;     // mean seconds
    double candidate_time_std = 0.0; // seconds
    double reference_time = 0.0;     // mean seconds
    double speedup = 0.0;

    bool operator==(const EvalTiming&) const = default;
};

struct EvalReport {
    EvalStatus status = EvalStatus::RuntimeError;
    std::string diagnostics;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::optional<std::uint64_t> failing_seed;
    std::optional<EvalTiming> timing;

    bool correct() const { return status == EvalStatus::Correct; }
    std::optional<double> speedup() const { return timing ? std::optional(timing->speedup) : std::nullopt; }

    bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

struct TimingStats {
    double mean = 0.0;
    double stddev = 0.0; // sample (n - 1) standard deviation; 0 for one sample
};

// reference / candidate; > 1 means the candidate is faster.
double compute_speedup(double reference_time, double candidate_time);

// No outlier trimming.
TimingStats aggregate_timing(std::span<const double> samples);

// Runs one job document and returns the reply document.
class Executor {
public:
    virtual ~Executor() = default;
    virtual nlohmann::json run(const nlohmann::json& job, std::chrono::milliseconds timeout) = 0;
};

// Reference timings are measured once per session and reused for every
// candidate while the TimingConfig stays the same.
struct ReferenceTimingCache {
    std::optional<double> seconds;
    TimingConfig measured_with;
};

struct EvalRequest {
    std::string job_id;
    std::chrono::milliseconds timeout{std::chrono::seconds(600)};
    bool profile = false;
};

struct EvalOutcome {
    EvalReport report;
    nlohmann::json job;
    nlohmann::json reply;
    std::optional<std::string> profile_csv_path;
};

nlohmann::json build_job(const std::string& kernel_source, const TaskSpec& task, const CorrectnessConfig& cc,
                         const TimingConfig& tc, const EvalRequest& request);

// Validates the reply against the job; throws ProtocolViolation.
void check_reply(const nlohmann::json& job, const nlohmann::json& reply);

// One executor job per call. Correctness gates timing: a non-Correct reply
// never yields timing data. ExecutorTimeout becomes a RuntimeError report.
EvalOutcome evaluate(const std::string& kernel_source, const TaskSpec& task, const CorrectnessConfig& cc,
                     const TimingConfig& tc, Executor& executor, const EvalRequest& request,
                     ReferenceTimingCache* reference_cache = nullptr);

} // namespace kagent
