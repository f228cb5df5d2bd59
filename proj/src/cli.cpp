#include "kagent/cli.hpp"

#include "kagent/executors.hpp"
#include "kagent/model_client.hpp"
#include "kagent/replay.hpp"
#include "kagent/session_store.hpp"
#include "kagent/task.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <glob.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <memory>

namespace kagent {

namespace fs = std::filesystem;

namespace {

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

std::unique_ptr<Executor> make_executor(const RunArgs& args)
{
    if (args.executor == "mock" || starts_with(args.executor, "mock:")) {
        std::string fixture = args.executor == "mock" ? args.executor_fixture : args.executor.substr(5);
        if (fixture.empty())
            throw ConfigError("--executor mock needs a replies fixture (mock:<path> or --executor-fixture)");
        return std::make_unique<MockExecutor>(MockExecutor::from_file(fixture));
    }
    if (starts_with(args.executor, "subprocess:")) {
        auto path = args.executor.substr(11);
        if (path.empty())
            throw ConfigError("--executor subprocess:<path> needs a path");
        return std::make_unique<SubprocessExecutor>(std::vector<std::string>{path});
    }
    throw ConfigError(fmt::format("unknown executor '{}' (expected mock[:<fixture>] or subprocess:<path>)",
                                  args.executor));
}

std::unique_ptr<ModelClient> make_model(const RunArgs& args)
{
    if (starts_with(args.model, "scripted:"))
        return std::make_unique<ScriptedModel>(load_script(args.model.substr(9)));
    if (args.model == "remote") {
        RemoteModelConfig cfg;
        cfg.endpoint = args.model_endpoint;
        cfg.model = args.model_name;
        if (const char* key = std::getenv("KERNEL_AGENT_API_KEY"))
            cfg.api_key = key;
        if (cfg.endpoint.empty() || cfg.model.empty())
            throw ConfigError("--model remote needs --model-endpoint and --model-name");
        if (cfg.api_key.empty())
            throw ConfigError("--model remote needs KERNEL_AGENT_API_KEY in the environment");
        return std::make_unique<RemoteModel>(std::move(cfg));
    }
    throw ConfigError(fmt::format("unknown model '{}' (expected scripted:<path> or remote)", args.model));
}

// Each session contributes its best Correct version.
std::optional<double> best_speedup(const SessionRecord& r)
{
    try {
        return r.reports.at(best_kernel(r).id).speedup();
    } catch (const NoCorrectVersion&) {
        return std::nullopt;
    }
}

std::string kernel_name(const SessionRecord& r)
{
    if (r.config.contains("task")) {
        const auto& t = r.config["task"];
        if (t.contains("name") && t["name"].is_string() && !t["name"].get<std::string>().empty())
            return t["name"].get<std::string>();
    }
    return r.task_id;
}

} // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err)
{
    std::unique_ptr<Executor> executor;
    std::unique_ptr<ModelClient> model;
    TaskSpec task;
    SessionOptions options;
    try {
        task = load_manifest(args.manifest_path);
        if (args.seed)
            task.rng_seed = *args.seed;
        validate(args.budget);
        executor = make_executor(args);
        model = make_model(args);
        if (args.out_dir.empty())
            throw ConfigError("--out is required");
        options.assets = load_assets(args.asset_dir.empty() ? default_asset_dir() : args.asset_dir);
    } catch (const Error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kExitConfig;
    }
    options.session_dir = args.out_dir;
    options.session_id = args.session_id.empty() ? task.task_id : args.session_id;
    options.regression_factor = args.regression_factor;
    options.allow_regeneration_fallback = args.allow_regeneration_fallback;
    options.progress = args.quiet ? nullptr : &out;

    SessionRecord record;
    try {
        record = run_session(task, args.budget, *model, *executor, args.schedule, options);
    } catch (const ConfigError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kExitConfig;
    } catch (const StoreError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        fmt::print(err, "session failed: {}\n", e.what());
        return kExitFailed;
    }
    if (record.terminal_phase == Phase::Done) {
        fmt::print(out, "Done: best {} at depth {}\n", record.best_version_id.value_or("-"), record.final_depth);
        return kExitDone;
    }
    fmt::print(out, "Failed: {}\n", record.failure_reason);
    return kExitFailed;
}

int cmd_replay(const std::string& session_dir, const std::string& out_dir, std::ostream& out, std::ostream& err)
{
    std::string target = out_dir;
    bool scratch = target.empty();
    if (scratch) {
        auto tmpl = (fs::temp_directory_path() / "kagent-replay-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) {
            fmt::print(err, "error: cannot create a scratch directory\n");
            return kExitConfig;
        }
        target = tmpl;
    }
    int code = kExitFailed;
    try {
        auto assets = load_assets(default_asset_dir());
        auto result = replay_session(session_dir, target, assets);
        if (result.identical()) {
            fmt::print(out, "replay identical: {} model calls, {} evaluations\n", result.original.calls.size(),
                       result.original.evals.size());
            code = kExitDone;
        } else {
            fmt::print(err, "Divergence: records first differ at {}\n", *result.difference);
        }
    } catch (const JournalIncomplete& e) {
        fmt::print(err, "JournalIncomplete: {}\n", e.what());
    } catch (const Divergence& e) {
        fmt::print(err, "Divergence: {}\n", e.what());
    } catch (const ConfigError& e) {
        fmt::print(err, "error: {}\n", e.what());
        code = kExitConfig;
    } catch (const Error& e) {
        fmt::print(err, "replay failed: {}\n", e.what());
    }
    if (scratch) {
        std::error_code ec;
        fs::remove_all(target, ec);
    }
    return code;
}

int cmd_report(const std::string& session_dir, const std::string& format, std::ostream& out, std::ostream& err)
{
    ReportFormat f;
    if (format == "json")
        f = ReportFormat::Json;
    else if (format == "markdown" || format == "md")
        f = ReportFormat::Markdown;
    else {
        fmt::print(err, "error: unknown report format '{}' (json or markdown)\n", format);
        return kExitConfig;
    }
    try {
        out << export_report(load_record(session_dir), f);
    } catch (const Error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitDone;
}

int cmd_bench_table(const std::string& pattern, std::ostream& out, std::ostream& err)
{
    glob_t g{};
    int rc = glob(pattern.c_str(), GLOB_ONLYDIR, nullptr, &g);
    std::vector<std::string> dirs;
    if (rc == 0)
        dirs.assign(g.gl_pathv, g.gl_pathv + g.gl_pathc);
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) {
        fmt::print(err, "error: cannot expand '{}'\n", pattern);
        return kExitConfig;
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<SpeedupRow> rows;
    for (const auto& d : dirs) {
        if (!fs::exists(fs::path(d) / "record.json"))
            continue;
        try {
            auto r = load_record(d);
            rows.push_back({kernel_name(r), best_speedup(r)});
        } catch (const Error& e) {
            fmt::print(err, "skipping {}: {}\n", d, e.what());
        }
    }
    if (rows.empty()) {
        fmt::print(err, "error: no session records match '{}'\n", pattern);
        return kExitConfig;
    }
    out << render_speedup_table(rows);
    return kExitDone;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Generate, debug and optimize GPU kernels with a language model in the loop"};
    app.set_config("--config", "", "TOML or INI file with defaults for any flag; flags win");
    app.require_subcommand(1);

    RunArgs run;
    long eval_timeout = run.budget.per_eval_timeout.count();
    auto* run_cmd = app.add_subcommand("run", "Run one refinement session for a task manifest");
    run_cmd->add_option("manifest", run.manifest_path, "Task manifest (JSON)")->required();
    run_cmd->add_option("--budget-depth", run.budget.max_depth, "Optimization iterations")->capture_default_str();
    run_cmd->add_option("--max-debug-attempts", run.budget.max_debug_attempts_per_cycle,
                        "Repair attempts per debug cycle")
        ->capture_default_str();
    run_cmd->add_option("--max-model-calls", run.budget.max_total_model_calls, "Model calls per session")
        ->capture_default_str();
    run_cmd->add_option("--eval-timeout", eval_timeout, "Seconds per executor job")->capture_default_str();
    run_cmd->add_option("--profile-start-matmul", run.schedule.matmul_start_depth, "First depth with profiling (matmul)")
        ->capture_default_str();
    run_cmd->add_option("--profile-start-activation", run.schedule.activation_start_depth,
                        "First depth with profiling (activation)")
        ->capture_default_str();
    run_cmd->add_option("--profile-start-other", run.schedule.other_start_depth, "First depth with profiling (other)")
        ->capture_default_str();
    run_cmd->add_option("--executor", run.executor, "mock[:<fixture>] or subprocess:<path>")->capture_default_str();
    run_cmd->add_option("--executor-fixture", run.executor_fixture, "Replies file for a plain mock executor");
    run_cmd->add_option("--model", run.model, "scripted:<path> or remote")->required();
    run_cmd->add_option("--model-endpoint", run.model_endpoint, "Chat-completions URL for --model remote");
    run_cmd->add_option("--model-name", run.model_name, "Model name for --model remote");
    run_cmd->add_option("--seed", run.seed, "Base seed for correctness trials");
    run_cmd->add_option("--out", run.out_dir, "Session directory")->required();
    run_cmd->add_option("--session-id", run.session_id, "Session id (default: task id)");
    run_cmd->add_option("--asset-dir", run.asset_dir, "Prompt asset directory");
    run_cmd->add_option("--regression-factor", run.regression_factor,
                        "Continue from the best version when a result falls below this fraction of it")
        ->capture_default_str();
    run_cmd->add_flag("--allow-regeneration", run.allow_regeneration_fallback,
                      "Accept a whole-kernel rewrite as a repair before the first correct version");
    run_cmd->add_flag("-q,--quiet", run.quiet, "Suppress the progress stream");

    std::string replay_dir, replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a session from its journal and compare records");
    replay_cmd->add_option("session_dir", replay_dir)->required();
    replay_cmd->add_option("--out", replay_out, "Keep the replayed session here (default: scratch directory)");

    std::string report_dir, report_format = "markdown";
    auto* report_cmd = app.add_subcommand("report", "Export a session record");
    report_cmd->add_option("session_dir", report_dir)->required();
    report_cmd->add_option("--format", report_format, "json or markdown")->capture_default_str();

    std::string bench_glob;
    auto* bench_cmd = app.add_subcommand("bench-table", "Speedup table across session directories");
    bench_cmd->add_option("sessions_glob", bench_glob, "Glob matching session directories")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*run_cmd) {
        run.budget.per_eval_timeout = std::chrono::seconds(eval_timeout);
        return cmd_run(run, out, err);
    }
    if (*replay_cmd)
        return cmd_replay(replay_dir, replay_out, out, err);
    if (*report_cmd)
        return cmd_report(report_dir, report_format, out, err);
    return cmd_bench_table(bench_glob, out, err);
}

} // namespace kagent
