#pragma once

#include "kagent/error.hpp"
#include "kagent/evaluator.hpp"
#include "kagent/model_client.hpp"
#include "kagent/phase.hpp"
#include "kagent/profiler.hpp"
#include "kagent/prompts.hpp"
#include "kagent/session_store.hpp"
#include "kagent/task.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace kagent {

KAGENT_DEFINE_ERROR(IllegalTransition, Error);

struct Budget {
    int max_depth = 12; // 0 means "stop once the first kernel is correct"
    int max_debug_attempts_per_cycle = 8;
    int max_total_model_calls = 200;
    std::chrono::seconds per_eval_timeout{600};
};

void validate(const Budget& b);

enum class Event {
    CodeProduced,
    EvalCorrect,
    EvalCompileError,
    EvalRuntimeError,
    EvalMismatch,
    DiagnosisProduced,
    PatchApplied,
    PatchRejected,
    BudgetHit,
};

std::string_view to_string(Event e);
Event event_for(EvalStatus status);

struct RefinementState {
    Phase phase = Phase::Synthesize;
    int depth = 0; // completed optimization iterations
    int debug_attempts_in_cycle = 0;
    int total_model_calls = 0;
    std::string current_version_id;
    std::optional<std::string> best_version_id;
    std::optional<double> best_speedup;
    // Correct version the in-flight optimization attempt started from.
    std::optional<std::string> anchor_version_id;
    bool in_optimization_cycle = false;

    bool operator==(const RefinementState&) const = default;
};

struct TransitionContext {
    Budget budget;
    WorkloadClass workload = WorkloadClass::Other;
    ProfilingSchedule schedule;
};

// Pure transition function; see docs/transitions.md for the full table.
// Throws IllegalTransition for events the current phase does not accept.
RefinementState advance(const RefinementState& state, Event event, const TransitionContext& ctx);

// Records a Correct evaluation of `version_id`: updates the best version when
// the speedup strictly improves on it.
RefinementState note_correct(RefinementState state, const std::string& version_id, double speedup);

enum class Continuation { ContinueFromCurrent, RevertToBest };

// RevertToBest iff latest < regression_factor * best.
Continuation select_continuation(double best_speedup, double latest_speedup, double regression_factor = 0.5);

struct SessionOptions {
    std::string session_dir;
    std::string session_id;
    GuidelineAssets assets;
    CorrectnessConfig correctness; // defaults before task overrides
    TimingConfig timing;
    PromptOptions prompt;
    double regression_factor = 0.5;
    bool allow_regeneration_fallback = false;
    double temperature = 1.0;
    std::size_t max_output_chars = 200'000;
    std::ostream* progress = nullptr;
    // Timestamp source; defaults to UTC wall clock.
    std::function<std::string()> clock;
};

// Runs the generate/test/debug/optimize loop to a terminal phase and returns
// the finalized record. Budget exhaustion without a correct kernel ends in
// Failed (no exception). ModelUnavailable / ExecutorUnavailable and other
// infrastructure errors finalize the record as Failed and are rethrown.
SessionRecord run_session(const TaskSpec& task, const Budget& budget, ModelClient& model, Executor& executor,
                          const ProfilingSchedule& schedule, const SessionOptions& options);

// Configuration snapshot stored in record.json; replay rebuilds from it.
nlohmann::json session_config(const TaskSpec& task, const Budget& budget, const ProfilingSchedule& schedule,
                              const SessionOptions& options);

std::string utc_timestamp();

} // namespace kagent
