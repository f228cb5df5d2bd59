#include "kagent/replay.hpp"

#include "kagent/text.hpp"

#include <fmt/format.h>

#include <filesystem>

namespace kagent {

using nlohmann::json;
namespace fs = std::filesystem;

ReplayModel::ReplayModel(std::string session_dir, SessionRecord record)
    : dir_(std::move(session_dir)), record_(std::move(record))
{
}

std::string ReplayModel::complete(const ModelRequest& request)
{
    if (next_ >= static_cast<int>(record_.calls.size()))
        throw JournalIncomplete(fmt::format("journal holds {} model calls; the replay needs more",
                                            record_.calls.size()));
    const auto& call = record_.calls[next_++];
    if (call.kind != request.kind)
        throw Divergence(fmt::format("model call {}: replay asked for a {} prompt, journal has {}", call.seq,
                                     to_string(request.kind), to_string(call.kind)));
    if (sha256_hex(request.prompt) != call.prompt_sha256)
        throw Divergence(fmt::format("model call {}: prompt differs from the journaled one", call.seq));
    auto path = (fs::path(dir_) / "calls" / (call_file_stem(call.seq) + ".response.txt")).string();
    std::string response;
    try {
        response = read_file(path);
    } catch (const IoError&) {
        throw JournalIncomplete(fmt::format("model call {}: response file {} is missing", call.seq, path));
    }
    if (sha256_hex(response) != call.response_sha256)
        throw Divergence(fmt::format("model call {}: response file {} does not match its recorded hash", call.seq,
                                     path));
    return response;
}

ReplayExecutor::ReplayExecutor(std::string session_dir) : dir_(std::move(session_dir)) {}

json ReplayExecutor::run(const json& job, std::chrono::milliseconds)
{
    ++next_;
    auto stem = (fs::path(dir_) / "evals" / call_file_stem(next_)).string();
    json recorded_job, reply;
    try {
        recorded_job = json::parse(read_file(stem + ".job.json"));
        reply = json::parse(read_file(stem + ".reply.json"));
    } catch (const IoError& e) {
        throw JournalIncomplete(fmt::format("evaluation {}: {}", next_, e.what()));
    } catch (const json::parse_error& e) {
        throw Divergence(fmt::format("evaluation {}: journal file is not valid JSON ({})", next_, e.what()));
    }
    if (recorded_job != job)
        throw Divergence(fmt::format("evaluation {}: job differs from the journaled one", next_));
    if (reply.value("executor_timeout", false))
        throw ExecutorTimeout(reply.value("diagnostics", std::string()));
    reply.erase("profile_csv_path");
    if (fs::exists(stem + ".profile.csv"))
        reply["profile_csv_path"] = stem + ".profile.csv";
    return reply;
}

std::optional<std::string> first_difference(const SessionRecord& a, const SessionRecord& b)
{
    auto ja = to_json(without_timestamps(a), true);
    auto jb = to_json(without_timestamps(b), true);
    auto patch = json::diff(ja, jb);
    if (patch.empty())
        return std::nullopt;
    return patch[0]["path"].get<std::string>();
}

ReplayResult replay_session(const std::string& session_dir, const std::string& out_dir,
                            const GuidelineAssets& assets, std::ostream* progress)
{
    ReplayResult result;
    result.original = load_record(session_dir);
    const auto& cfg = result.original.config;

    TaskSpec task;
    Budget budget;
    ProfilingSchedule schedule;
    SessionOptions options;
    try {
        task = task_from_json(cfg.at("task"));
        const auto& b = cfg.at("budget");
        budget.max_depth = b.at("max_depth").get<int>();
        budget.max_debug_attempts_per_cycle = b.at("max_debug_attempts_per_cycle").get<int>();
        budget.max_total_model_calls = b.at("max_total_model_calls").get<int>();
        budget.per_eval_timeout = std::chrono::seconds(b.at("per_eval_timeout_s").get<long>());
        schedule = schedule_from_json(cfg.at("schedule"));
        options.correctness = correctness_from_json(cfg.at("correctness"));
        options.timing = timing_from_json(cfg.at("timing"));
        options.regression_factor = cfg.at("regression_factor").get<double>();
        options.allow_regeneration_fallback = cfg.at("allow_regeneration_fallback").get<bool>();
        options.prompt.diagnosis_char_budget = cfg.at("diagnosis_char_budget").get<std::size_t>();
        options.temperature = cfg.at("temperature").get<double>();
        options.max_output_chars = cfg.at("max_output_chars").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}/record.json: unusable configuration snapshot: {}", session_dir, e.what()));
    }
    options.session_dir = out_dir;
    options.session_id = result.original.session_id;
    options.assets = assets;
    options.progress = progress;

    ReplayModel model(session_dir, result.original);
    ReplayExecutor executor(session_dir);
    result.replayed = run_session(task, budget, model, executor, schedule, options);
    if (model.served() != static_cast<int>(result.original.calls.size()))
        throw Divergence(fmt::format("replay finished after {} of {} journaled model calls", model.served(),
                                     result.original.calls.size()));
    result.difference = first_difference(result.original, result.replayed);
    return result;
}

} // namespace kagent
