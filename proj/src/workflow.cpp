#include "kagent/workflow.hpp"

#include "kagent/patch.hpp"
#include "kagent/text.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>

namespace kagent {

using nlohmann::json;
namespace fs = std::filesystem;

void validate(const Budget& b)
{
    if (b.max_depth < 0)
        throw ConfigError("max_depth must not be negative");
    if (b.max_debug_attempts_per_cycle < 1)
        throw ConfigError("max_debug_attempts_per_cycle must be at least 1");
    if (b.max_total_model_calls < 1)
        throw ConfigError("max_total_model_calls must be at least 1");
    if (b.per_eval_timeout.count() < 1)
        throw ConfigError("per_eval_timeout must be at least one second");
}

std::string_view to_string(Event e)
{
    switch (e) {
    case Event::CodeProduced:
        return "CodeProduced";
    case Event::EvalCorrect:
        return "EvalCorrect";
    case Event::EvalCompileError:
        return "EvalCompileError";
    case Event::EvalRuntimeError:
        return "EvalRuntimeError";
    case Event::EvalMismatch:
        return "EvalMismatch";
    case Event::DiagnosisProduced:
        return "DiagnosisProduced";
    case Event::PatchApplied:
        return "PatchApplied";
    case Event::PatchRejected:
        return "PatchRejected";
    case Event::BudgetHit:
        return "BudgetHit";
    }
    return "?";
}

Event event_for(EvalStatus status)
{
    switch (status) {
    case EvalStatus::CompileError:
        return Event::EvalCompileError;
    case EvalStatus::RuntimeError:
        return Event::EvalRuntimeError;
    case EvalStatus::Mismatch:
        return Event::EvalMismatch;
    case EvalStatus::Correct:
        return Event::EvalCorrect;
    }
    return Event::EvalRuntimeError;
}

namespace {

[[noreturn]] void illegal(const RefinementState& s, Event e)
{
    throw IllegalTransition(fmt::format("event {} is not legal in phase {}", to_string(e), to_string(s.phase)));
}

// Where a correct kernel at the state's depth goes next.
Phase phase_after_correct(const RefinementState& s, const TransitionContext& ctx)
{
    if (s.depth >= ctx.budget.max_depth)
        return Phase::Done;
    return profiling_enabled(ctx.workload, s.depth + 1, ctx.schedule) ? Phase::ProfileRefine : Phase::Optimize;
}

// A failed evaluation or a rejected patch: one more debug attempt, or the
// cycle is exhausted.
RefinementState on_failure(RefinementState s, const TransitionContext& ctx)
{
    if (s.debug_attempts_in_cycle < ctx.budget.max_debug_attempts_per_cycle) {
        ++s.debug_attempts_in_cycle;
        s.phase = Phase::Diagnose;
        return s;
    }
    if (!s.best_version_id || !s.in_optimization_cycle || !s.anchor_version_id) {
        s.phase = Phase::Failed;
        return s;
    }
    // Discard the broken optimization attempt; depth does not advance.
    s.current_version_id = *s.anchor_version_id;
    s.in_optimization_cycle = false;
    s.debug_attempts_in_cycle = 0;
    s.phase = phase_after_correct(s, ctx);
    return s;
}

} // namespace

RefinementState advance(const RefinementState& state, Event event, const TransitionContext& ctx)
{
    if (is_terminal(state.phase))
        illegal(state, event);
    RefinementState s = state;
    if (event == Event::BudgetHit) {
        s.phase = s.best_version_id ? Phase::Done : Phase::Failed;
        return s;
    }
    switch (state.phase) {
    case Phase::Synthesize:
        if (event != Event::CodeProduced)
            illegal(state, event);
        s.phase = Phase::Test;
        s.debug_attempts_in_cycle = 0;
        s.in_optimization_cycle = false;
        return s;
    case Phase::Optimize:
    case Phase::ProfileRefine:
        if (event != Event::CodeProduced)
            illegal(state, event);
        s.phase = Phase::Test;
        s.debug_attempts_in_cycle = 0;
        s.in_optimization_cycle = true;
        return s;
    case Phase::Test:
        switch (event) {
        case Event::EvalCorrect:
            if (s.in_optimization_cycle)
                ++s.depth;
            s.in_optimization_cycle = false;
            s.debug_attempts_in_cycle = 0;
            s.anchor_version_id.reset();
            s.phase = phase_after_correct(s, ctx);
            return s;
        case Event::EvalCompileError:
        case Event::EvalRuntimeError:
        case Event::EvalMismatch:
            return on_failure(s, ctx);
        default:
            illegal(state, event);
        }
    case Phase::Diagnose:
        if (event != Event::DiagnosisProduced)
            illegal(state, event);
        s.phase = Phase::Repair;
        return s;
    case Phase::Repair:
        if (event == Event::PatchApplied) {
            s.phase = Phase::Test;
            return s;
        }
        if (event == Event::PatchRejected)
            return on_failure(s, ctx);
        illegal(state, event);
    case Phase::Done:
    case Phase::Failed:
        break;
    }
    illegal(state, event);
}

RefinementState note_correct(RefinementState state, const std::string& version_id, double speedup)
{
    if (!state.best_speedup || speedup > *state.best_speedup) {
        state.best_version_id = version_id;
        state.best_speedup = speedup;
    }
    return state;
}

Continuation select_continuation(double best_speedup, double latest_speedup, double regression_factor)
{
    return latest_speedup < regression_factor * best_speedup ? Continuation::RevertToBest
                                                             : Continuation::ContinueFromCurrent;
}

std::string utc_timestamp()
{
    auto now = std::chrono::system_clock::now();
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

json session_config(const TaskSpec& task, const Budget& budget, const ProfilingSchedule& schedule,
                    const SessionOptions& options)
{
    return {{"task", to_json(task)},
            {"budget",
             {{"max_depth", budget.max_depth},
              {"max_debug_attempts_per_cycle", budget.max_debug_attempts_per_cycle},
              {"max_total_model_calls", budget.max_total_model_calls},
              {"per_eval_timeout_s", budget.per_eval_timeout.count()}}},
            {"schedule", to_json(schedule)},
            {"correctness", to_json(task.correctness(options.correctness))},
            {"timing", to_json(task.timing(options.timing))},
            {"regression_factor", options.regression_factor},
            {"allow_regeneration_fallback", options.allow_regeneration_fallback},
            {"diagnosis_char_budget", options.prompt.diagnosis_char_budget},
            {"temperature", options.temperature},
            {"max_output_chars", options.max_output_chars}};
}

namespace {

// Thrown by call_model when the global model-call budget is spent.
struct BudgetSpent {};

class Session {
public:
    Session(const TaskSpec& task, const Budget& budget, ModelClient& model, Executor& executor,
            const ProfilingSchedule& schedule, const SessionOptions& options)
        : task_(task),
          ctx_{budget, task.workload_class, schedule},
          executor_(executor),
          options_(options),
          cc_(task.correctness(options.correctness)),
          tc_(task.timing(options.timing)),
          store_(SessionStore::create(options.session_dir, options.session_id, task.task_id,
                                      session_config(task, budget, schedule, options))),
          journal_(model, store_.calls_dir(), [this](const CallEntry& c) { store_.append_call(c); }),
          events_((fs::path(options.session_dir) / "events.log").string(), std::ios::app)
    {
    }

    SessionRecord run()
    {
        emit("Start");
        try {
            while (!is_terminal(state_.phase))
                step();
        } catch (const std::exception& e) {
            emit(fmt::format("Abort({})", e.what()));
            store_.finalize(Phase::Failed, e.what(), state_.best_version_id, state_.depth);
            throw;
        }
        std::string reason;
        if (state_.phase == Phase::Failed)
            reason = failure_reason_.empty() ? "no correct kernel within budget" : failure_reason_;
        store_.finalize(state_.phase, reason, state_.best_version_id, state_.depth);
        return store_.record();
    }

private:
    std::string now() const { return options_.clock ? options_.clock() : utc_timestamp(); }

    void emit(std::string_view event)
    {
        auto line = fmt::format("{} | {} | {} | {} | {}", now(), to_string(state_.phase), event, state_.depth,
                                state_.current_version_id.empty() ? "-" : state_.current_version_id);
        if (options_.progress)
            *options_.progress << line << '\n' << std::flush;
        if (events_)
            events_ << line << '\n' << std::flush;
    }

    void transition(Event e)
    {
        state_ = advance(state_, e, ctx_);
        emit(to_string(e));
    }

    void step()
    {
        try {
            switch (state_.phase) {
            case Phase::Synthesize:
                synthesize();
                break;
            case Phase::Test:
                test();
                break;
            case Phase::Diagnose:
                diagnose();
                break;
            case Phase::Repair:
                repair();
                break;
            case Phase::Optimize:
            case Phase::ProfileRefine:
                optimize();
                break;
            case Phase::Done:
            case Phase::Failed:
                break;
            }
        } catch (const BudgetSpent&) {
            if (!state_.best_version_id)
                failure_reason_ = fmt::format("model-call budget of {} exhausted before any kernel was correct",
                                              ctx_.budget.max_total_model_calls);
            transition(Event::BudgetHit);
        }
    }

    std::string call_model(const Prompt& prompt)
    {
        if (state_.total_model_calls >= ctx_.budget.max_total_model_calls)
            throw BudgetSpent{};
        ++state_.total_model_calls;
        ModelRequest request;
        request.prompt = prompt.text;
        request.kind = prompt.kind;
        request.temperature = options_.temperature;
        request.max_output_chars = options_.max_output_chars;
        request.request_id = fmt::format("{}-r{:04d}", options_.session_id, state_.total_model_calls);
        return journal_.complete(request);
    }

    // Code block from the response, re-prompting once on a format violation.
    std::optional<std::string> request_code(const Prompt& prompt)
    {
        auto response = call_model(prompt);
        try {
            return extract_code_block(response);
        } catch (const NoCodeBlock& e) {
            response = call_model(with_format_reminder(
                prompt, fmt::format("{}. Output the entire code in ONE CODEBLOCK (wrap in ``` and ```).", e.what())));
        }
        try {
            return extract_code_block(response);
        } catch (const NoCodeBlock&) {
            return std::nullopt;
        }
    }

    const KernelVersion& version(const std::string& id) const
    {
        const auto* v = store_.record().find_version(id);
        if (!v)
            throw UnknownVersionId(id);
        return *v;
    }

    std::string add_version(std::string source, VersionOrigin origin, std::optional<std::string> parent)
    {
        KernelVersion v;
        v.fingerprint = sha256_hex(source);
        v.id = make_version_id(store_.record().versions.size() + 1, v.fingerprint);
        v.parent_id = std::move(parent);
        v.source = std::move(source);
        v.origin = origin;
        v.depth_at_creation = state_.depth;
        v.created_at = now();
        auto id = v.id;
        store_.append_version(std::move(v));
        return id;
    }

    EvalOutcome run_eval(const std::string& version_id, bool want_profile)
    {
        ++eval_seq_;
        EvalRequest request;
        request.job_id = fmt::format("{}-e{:04d}", options_.session_id, eval_seq_);
        request.timeout = ctx_.budget.per_eval_timeout;
        request.profile = want_profile;
        auto outcome = evaluate(version(version_id).source, task_, cc_, tc_, executor_, request, &reference_cache_);
        std::optional<std::string> csv;
        if (outcome.profile_csv_path) {
            try {
                csv = read_file(*outcome.profile_csv_path);
            } catch (const IoError& e) {
                emit(fmt::format("note: profile export unreadable ({})", e.what()));
            }
        } else if (want_profile) {
            emit("note: executor returned no profile export");
        }
        store_.append_eval({eval_seq_, version_id, request.job_id, want_profile, false}, outcome.job, outcome.reply,
                           csv);
        if (csv && !store_.record().profiles.count(version_id)) {
            try {
                store_.append_profile(version_id, parse_profile(*csv));
            } catch (const ProfileError& e) {
                emit(fmt::format("note: profile export rejected ({})", e.what()));
            }
        }
        return outcome;
    }

    // The next optimization prompt needs a profile of the current kernel; an
    // older version we fell back to may have been evaluated without one.
    void ensure_profile()
    {
        if (state_.phase != Phase::ProfileRefine || store_.record().profiles.count(state_.current_version_id))
            return;
        emit("note: profiling fallback version");
        run_eval(state_.current_version_id, true);
    }

    void synthesize()
    {
        auto code = request_code(build_initial(task_, options_.assets));
        if (!code) {
            emit("note: synthesis response had no code block");
            return;
        }
        state_.current_version_id = add_version(std::move(*code), VersionOrigin::Initial, std::nullopt);
        cycle_profiling_ = false;
        transition(Event::CodeProduced);
    }

    void test()
    {
        const auto id = state_.current_version_id;
        const bool optimizing = state_.in_optimization_cycle;
        const int depth_if_correct = optimizing ? state_.depth + 1 : state_.depth;
        const bool want_profile = depth_if_correct < ctx_.budget.max_depth &&
                                  profiling_enabled(ctx_.workload, depth_if_correct + 1, ctx_.schedule);
        auto outcome = run_eval(id, want_profile);
        const auto& report = outcome.report;
        store_.append_report(id, report);
        if (report.correct())
            state_ = note_correct(state_, id, report.timing->speedup);
        transition(event_for(report.status));

        TrajectoryPoint point;
        point.depth = state_.depth;
        point.speedup = report.speedup();
        point.correct = report.correct();
        point.version_id = id;
        point.profiling_enabled = cycle_profiling_;
        point.wall_time = now();
        store_.append_trajectory_point(std::move(point));

        if (report.correct() && optimizing && !is_terminal(state_.phase) &&
            select_continuation(*state_.best_speedup, report.timing->speedup, options_.regression_factor) ==
                Continuation::RevertToBest) {
            state_.current_version_id = *state_.best_version_id;
            emit("note: regression below threshold, continuing from best version");
        }
        if (state_.phase == Phase::Failed)
            failure_reason_ = fmt::format("debug budget of {} attempts exhausted before the kernel was correct",
                                          ctx_.budget.max_debug_attempts_per_cycle);
        ensure_profile();
    }

    void diagnose()
    {
        const auto& current = version(state_.current_version_id);
        const auto& report = store_.record().reports.at(current.id);
        auto prompt = build_diagnosis(current.source, report, options_.assets);
        diagnosis_ = call_model(prompt);
        if (diagnosis_.find_first_not_of(" \t\r\n") == std::string::npos)
            diagnosis_ = "(the diagnosis step returned no analysis; rely on the failure evidence)";
        transition(Event::DiagnosisProduced);
    }

    std::string apply_response(const std::string& response, const KernelVersion& base)
    {
        try {
            auto patch = bind_patch(parse_patch(response), base.id, base.source);
            return apply_patch(base.source, patch);
        } catch (const EmptyPatch&) {
            if (options_.allow_regeneration_fallback && !state_.best_version_id) {
                try {
                    return extract_code_block(response);
                } catch (const NoCodeBlock&) {
                }
            }
            throw;
        }
    }

    void repair()
    {
        const auto& base = version(state_.current_version_id);
        auto prompt = build_repair(base.source, diagnosis_, options_.prompt);
        auto response = call_model(prompt);
        std::optional<std::string> repaired;
        try {
            repaired = apply_response(response, base);
        } catch (const PatchError& e) {
            emit(fmt::format("note: patch rejected ({})", e.what()));
            response = call_model(with_format_reminder(prompt, e.what()));
            try {
                repaired = apply_response(response, base);
            } catch (const PatchError& e2) {
                emit(fmt::format("note: patch rejected again ({})", e2.what()));
            }
        }
        if (!repaired) {
            transition(Event::PatchRejected);
            ensure_profile();
            return;
        }
        state_.current_version_id = add_version(std::move(*repaired), VersionOrigin::Repair, base.id);
        transition(Event::PatchApplied);
    }

    void optimize()
    {
        const auto& base = version(state_.current_version_id);
        cycle_profiling_ = state_.phase == Phase::ProfileRefine;
        std::optional<ProfileSummary> profile;
        if (cycle_profiling_) {
            auto it = store_.record().profiles.find(base.id);
            if (it != store_.record().profiles.end())
                profile = it->second;
            else
                emit("note: profiling scheduled but no profile is available");
        }
        auto code = request_code(build_optimization(base.source, options_.assets, profile));
        if (!code) {
            emit("note: optimization response had no code block; attempt discarded");
            return;
        }
        state_.anchor_version_id = base.id;
        state_.current_version_id = add_version(std::move(*code), VersionOrigin::Optimization, base.id);
        transition(Event::CodeProduced);
    }

    const TaskSpec& task_;
    TransitionContext ctx_;
    Executor& executor_;
    const SessionOptions& options_;
    CorrectnessConfig cc_;
    TimingConfig tc_;
    SessionStore store_;
    JournalingModel journal_;
    std::ofstream events_;
    RefinementState state_;
    ReferenceTimingCache reference_cache_;
    std::string diagnosis_;
    std::string failure_reason_;
    bool cycle_profiling_ = false;
    int eval_seq_ = 0;
};

} // namespace

SessionRecord run_session(const TaskSpec& task, const Budget& budget, ModelClient& model, Executor& executor,
                          const ProfilingSchedule& schedule, const SessionOptions& options)
{
    validate(task);
    validate(budget);
    validate(task.correctness(options.correctness));
    validate(task.timing(options.timing));
    if (options.session_dir.empty() || options.session_id.empty())
        throw ConfigError("session directory and id are required");
    if (!(options.regression_factor >= 0))
        throw ConfigError("regression_factor must be non-negative");
    Session session(task, budget, model, executor, schedule, options);
    return session.run();
}

} // namespace kagent
