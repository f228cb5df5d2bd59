#include "kagent/evaluator.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

namespace kagent {

using nlohmann::json;

std::string_view to_string(EvalStatus s)
{
    switch (s) {
    case EvalStatus::CompileError:
        return "CompileError";
    case EvalStatus::RuntimeError:
        return "RuntimeError";
    case EvalStatus::Mismatch:
        return "Mismatch";
    case EvalStatus::Correct:
        return "Correct";
    }
    return "?";
}

std::string_view wire_status(EvalStatus s)
{
    switch (s) {
    case EvalStatus::CompileError:
        return "compile_error";
    case EvalStatus::RuntimeError:
        return "runtime_error";
    case EvalStatus::Mismatch:
        return "mismatch";
    case EvalStatus::Correct:
        return "correct";
    }
    return "?";
}

EvalStatus parse_wire_status(std::string_view s)
{
    for (auto st : {EvalStatus::CompileError, EvalStatus::RuntimeError, EvalStatus::Mismatch, EvalStatus::Correct})
        if (wire_status(st) == s)
            return st;
    throw ProtocolViolation(fmt::format("unknown reply status '{}'", s));
}

double compute_speedup(double reference_time, double candidate_time)
{
    if (!(reference_time > 0) || !(candidate_time > 0))
        throw NonPositiveTime(fmt::format("speedup needs positive times (reference {}, candidate {})", reference_time,
                                          candidate_time));
    return reference_time / candidate_time;
}

TimingStats aggregate_timing(std::span<const double> samples)
{
    if (samples.empty())
        throw EmptySamples("no timing samples");
    const auto n = static_cast<double>(samples.size());
    TimingStats stats;
    stats.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double s : samples)
            ss += (s - stats.mean) * (s - stats.mean);
        stats.stddev = std::sqrt(ss / (n - 1));
    }
    return stats;
}

json to_json(const EvalReport& r)
{
    json j = {{"status", to_string(r.status)},
              {"diagnostics", r.diagnostics},
              {"max_abs_err", r.max_abs_err},
              {"max_rel_err", r.max_rel_err},
              {"failing_seed", r.failing_seed ? json(*r.failing_seed) : json(nullptr)}};
    if (r.timing) {
        j["candidate_time"] = r.timing->candidate_time;
        j["candidate_time_std"] = r.timing->candidate_time_std;
        j["reference_time"] = r.timing->reference_time;
        j["speedup"] = r.timing->speedup;
    }
    return j;
}

EvalReport report_from_json(const json& j)
{
    EvalReport r;
    auto status = j.at("status").get<std::string>();
    bool found = false;
    for (auto st : {EvalStatus::CompileError, EvalStatus::RuntimeError, EvalStatus::Mismatch, EvalStatus::Correct}) {
        if (to_string(st) == status) {
            r.status = st;
            found = true;
        }
    }
    if (!found)
        throw Error("unknown report status " + status);
    r.diagnostics = j.value("diagnostics", std::string{});
    r.max_abs_err = j.value("max_abs_err", 0.0);
    r.max_rel_err = j.value("max_rel_err", 0.0);
    if (j.contains("failing_seed") && !j["failing_seed"].is_null())
        r.failing_seed = j["failing_seed"].get<std::uint64_t>();
    if (j.contains("speedup")) {
        r.timing = EvalTiming{j.at("candidate_time").get<double>(), j.at("candidate_time_std").get<double>(),
                              j.at("reference_time").get<double>(), j.at("speedup").get<double>()};
    }
    return r;
}

json build_job(const std::string& kernel_source, const TaskSpec& task, const CorrectnessConfig& cc,
               const TimingConfig& tc, const EvalRequest& request)
{
    json inputs = json::array();
    for (const auto& in : task.inputs)
        inputs.push_back({{"shape", in.shape}, {"dtype", to_string(in.dtype)}, {"distribution", to_string(in.distribution)}});
    json job = {{"job_id", request.job_id},
                {"mode", task.harness_mode},
                {"reference_source", task.reference_source},
                {"candidate_source", kernel_source},
                {"input_spec", inputs},
                {"rtol", cc.rtol},
                {"atol", cc.atol},
                {"trials", cc.num_random_trials},
                {"seed", cc.rng_seed},
                {"warmup_iters", tc.warmup_iters},
                {"timed_iters", tc.timed_iters},
                {"timeout_s", std::chrono::duration<double>(request.timeout).count()},
                {"isolation", true}};
    if (request.profile)
        job["profile"] = true;
    return job;
}

namespace {

double positive_number(const json& reply, const char* key)
{
    if (!reply.contains(key) || !reply[key].is_number())
        throw ProtocolViolation(fmt::format("correct reply lacks numeric {}", key));
    auto v = reply[key].get<double>();
    if (!(v > 0) || !std::isfinite(v))
        throw ProtocolViolation(fmt::format("reply {} = {} is not a positive time", key, v));
    return v;
}

double error_number(const json& reply, const char* key)
{
    if (!reply.contains(key) || reply[key].is_null())
        return 0.0;
    if (!reply[key].is_number())
        throw ProtocolViolation(fmt::format("reply {} is not a number", key));
    return reply[key].get<double>();
}

} // namespace

void check_reply(const json& job, const json& reply)
{
    if (!reply.is_object())
        throw ProtocolViolation("executor reply is not a JSON object");
    if (!reply.contains("job_id") || reply["job_id"] != job.at("job_id"))
        throw ProtocolViolation("executor reply job_id does not match the job");
    if (!reply.contains("status") || !reply["status"].is_string())
        throw ProtocolViolation("executor reply lacks a status");
    auto status = parse_wire_status(reply["status"].get<std::string>());
    if (reply.contains("diagnostics") && !reply["diagnostics"].is_string() && !reply["diagnostics"].is_null())
        throw ProtocolViolation("executor reply diagnostics must be a string");
    if (reply.contains("failing_seed") && !reply["failing_seed"].is_null() && !reply["failing_seed"].is_number_integer())
        throw ProtocolViolation("executor reply failing_seed must be an integer");
    if (status == EvalStatus::Correct) {
        positive_number(reply, "reference_time_s");
        positive_number(reply, "candidate_time_s");
        if (!reply.contains("candidate_time_std_s") || !reply["candidate_time_std_s"].is_number() ||
            reply["candidate_time_std_s"].get<double>() < 0)
            throw ProtocolViolation("correct reply lacks a non-negative candidate_time_std_s");
    }
}

EvalOutcome evaluate(const std::string& kernel_source, const TaskSpec& task, const CorrectnessConfig& cc,
                     const TimingConfig& tc, Executor& executor, const EvalRequest& request,
                     ReferenceTimingCache* reference_cache)
{
    EvalOutcome out;
    out.job = build_job(kernel_source, task, cc, tc, request);
    try {
        out.reply = executor.run(out.job, request.timeout);
    } catch (const ExecutorTimeout& e) {
        out.reply = {{"job_id", request.job_id},
                     {"status", "runtime_error"},
                     {"diagnostics", e.what()},
                     {"executor_timeout", true}};
        out.report.status = EvalStatus::RuntimeError;
        out.report.diagnostics = fmt::format("executor timed out after {} s: {}",
                                             std::chrono::duration<double>(request.timeout).count(), e.what());
        return out;
    }
    check_reply(out.job, out.reply);

    const auto& reply = out.reply;
    auto& report = out.report;
    report.status = parse_wire_status(reply["status"].get<std::string>());
    if (reply.contains("diagnostics") && reply["diagnostics"].is_string())
        report.diagnostics = reply["diagnostics"].get<std::string>();
    report.max_abs_err = error_number(reply, "max_abs_err");
    report.max_rel_err = error_number(reply, "max_rel_err");
    if (reply.contains("failing_seed") && !reply["failing_seed"].is_null())
        report.failing_seed = reply["failing_seed"].get<std::uint64_t>();

    if (report.status == EvalStatus::Correct) {
        double reference = reply["reference_time_s"].get<double>();
        if (reference_cache) {
            if (reference_cache->seconds && reference_cache->measured_with == tc) {
                reference = *reference_cache->seconds;
            } else {
                reference_cache->seconds = reference;
                reference_cache->measured_with = tc;
            }
        }
        EvalTiming timing;
        timing.reference_time = reference;
        timing.candidate_time = reply["candidate_time_s"].get<double>();
        timing.candidate_time_std = reply["candidate_time_std_s"].get<double>();
        timing.speedup = compute_speedup(timing.reference_time, timing.candidate_time);
        report.timing = timing;
    }
    if (request.profile && reply.contains("profile_csv_path") && reply["profile_csv_path"].is_string())
        out.profile_csv_path = reply["profile_csv_path"].get<std::string>();
    return out;
}

} // namespace kagent
