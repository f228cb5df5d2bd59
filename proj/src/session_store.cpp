#include "kagent/session_store.hpp"

#include "kagent/text.hpp"

#include <fmt/format.h>

#include <filesystem>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace kagent {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Phase p)
{
    switch (p) {
    case Phase::Synthesize:
        return "Synthesize";
    case Phase::Test:
        return "Test";
    case Phase::Diagnose:
        return "Diagnose";
    case Phase::Repair:
        return "Repair";
    case Phase::Optimize:
        return "Optimize";
    case Phase::ProfileRefine:
        return "ProfileRefine";
    case Phase::Done:
        return "Done";
    case Phase::Failed:
        return "Failed";
    }
    return "?";
}

Phase parse_phase(std::string_view s)
{
    for (auto p : {Phase::Synthesize, Phase::Test, Phase::Diagnose, Phase::Repair, Phase::Optimize,
                   Phase::ProfileRefine, Phase::Done, Phase::Failed})
        if (to_string(p) == s)
            return p;
    throw Error(fmt::format("unknown phase '{}'", s));
}

std::string_view to_string(VersionOrigin o)
{
    switch (o) {
    case VersionOrigin::Initial:
        return "initial";
    case VersionOrigin::Repair:
        return "repair";
    case VersionOrigin::Optimization:
        return "optimization";
    }
    return "?";
}

namespace {

VersionOrigin parse_origin(std::string_view s)
{
    for (auto o : {VersionOrigin::Initial, VersionOrigin::Repair, VersionOrigin::Optimization})
        if (to_string(o) == s)
            return o;
    throw StoreError(fmt::format("unknown version origin '{}'", s));
}

json optional_json(const std::optional<std::string>& s)
{
    return s ? json(*s) : json(nullptr);
}

std::optional<std::string> optional_string(const json& j, const char* key)
{
    if (!j.contains(key) || j[key].is_null())
        return std::nullopt;
    return j[key].get<std::string>();
}

std::string version_path(const std::string& dir, const std::string& id)
{
    return (fs::path(dir) / "versions" / (id + ".src")).string();
}

} // namespace

std::string make_version_id(std::size_t seq, const std::string& fingerprint)
{
    return fmt::format("v{:03d}-{}", seq, fingerprint.substr(0, 12));
}

const KernelVersion* SessionRecord::find_version(const std::string& id) const
{
    for (const auto& v : versions)
        if (v.id == id)
            return &v;
    return nullptr;
}

bool SessionRecord::operator==(const SessionRecord& o) const
{
    auto calls_equal = [](const std::vector<CallEntry>& a, const std::vector<CallEntry>& b) {
        if (a.size() != b.size())
            return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto &x = a[i], &y = b[i];
            if (x.seq != y.seq || x.request_id != y.request_id || x.kind != y.kind || x.occurrence != y.occurrence ||
                x.prompt_sha256 != y.prompt_sha256 || x.response_sha256 != y.response_sha256)
                return false;
        }
        return true;
    };
    return schema_version == o.schema_version && session_id == o.session_id && task_id == o.task_id &&
           config == o.config && versions == o.versions && reports == o.reports && profiles == o.profiles &&
           trajectory == o.trajectory && calls_equal(calls, o.calls) && evals == o.evals &&
           terminal_phase == o.terminal_phase && failure_reason == o.failure_reason &&
           best_version_id == o.best_version_id && final_depth == o.final_depth;
}

json to_json(const SessionRecord& r, bool include_sources)
{
    json versions = json::array();
    for (const auto& v : r.versions) {
        json jv = {{"id", v.id},
                   {"parent_id", optional_json(v.parent_id)},
                   {"fingerprint", v.fingerprint},
                   {"origin", to_string(v.origin)},
                   {"depth_at_creation", v.depth_at_creation},
                   {"created_at", v.created_at}};
        if (include_sources)
            jv["source"] = v.source;
        versions.push_back(std::move(jv));
    }
    json reports = json::object();
    for (const auto& [id, report] : r.reports)
        reports[id] = to_json(report);
    json profiles = json::object();
    for (const auto& [id, profile] : r.profiles)
        profiles[id] = to_json(profile);
    json trajectory = json::array();
    for (const auto& p : r.trajectory)
        trajectory.push_back({{"depth", p.depth},
                              {"speedup", p.speedup ? json(*p.speedup) : json(nullptr)},
                              {"correct", p.correct},
                              {"version_id", p.version_id},
                              {"profiling_enabled", p.profiling_enabled},
                              {"wall_time", p.wall_time}});
    json calls = json::array();
    for (const auto& c : r.calls)
        calls.push_back({{"seq", c.seq},
                         {"request_id", c.request_id},
                         {"kind", to_string(c.kind)},
                         {"occurrence", c.occurrence},
                         {"prompt_sha256", c.prompt_sha256},
                         {"response_sha256", c.response_sha256}});
    json evals = json::array();
    for (const auto& e : r.evals)
        evals.push_back({{"seq", e.seq},
                         {"version_id", e.version_id},
                         {"job_id", e.job_id},
                         {"profile_requested", e.profile_requested},
                         {"profile_captured", e.profile_captured}});
    return {{"schema_version", r.schema_version},
            {"session_id", r.session_id},
            {"task_id", r.task_id},
            {"config", r.config},
            {"versions", versions},
            {"reports", reports},
            {"profiles", profiles},
            {"trajectory", trajectory},
            {"calls", calls},
            {"evals", evals},
            {"terminal_phase", r.terminal_phase ? json(to_string(*r.terminal_phase)) : json(nullptr)},
            {"failure_reason", r.failure_reason},
            {"best_version_id", optional_json(r.best_version_id)},
            {"final_depth", r.final_depth}};
}

SessionRecord record_from_json(const json& j)
{
    SessionRecord r;
    try {
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kRecordSchemaVersion)
            throw StoreError(fmt::format("unsupported record schema_version {}", r.schema_version));
        r.session_id = j.at("session_id").get<std::string>();
        r.task_id = j.at("task_id").get<std::string>();
        r.config = j.at("config");
        for (const auto& jv : j.at("versions")) {
            KernelVersion v;
            v.id = jv.at("id").get<std::string>();
            v.parent_id = optional_string(jv, "parent_id");
            v.fingerprint = jv.at("fingerprint").get<std::string>();
            v.origin = parse_origin(jv.at("origin").get<std::string>());
            v.depth_at_creation = jv.at("depth_at_creation").get<int>();
            v.created_at = jv.value("created_at", std::string{});
            v.source = jv.value("source", std::string{});
            r.versions.push_back(std::move(v));
        }
        for (const auto& [id, jr] : j.at("reports").items())
            r.reports.emplace(id, report_from_json(jr));
        for (const auto& [id, jp] : j.at("profiles").items())
            r.profiles.emplace(id, profile_from_json(jp));
        for (const auto& jp : j.at("trajectory")) {
            TrajectoryPoint p;
            p.depth = jp.at("depth").get<int>();
            if (!jp.at("speedup").is_null())
                p.speedup = jp["speedup"].get<double>();
            p.correct = jp.at("correct").get<bool>();
            p.version_id = jp.at("version_id").get<std::string>();
            p.profiling_enabled = jp.at("profiling_enabled").get<bool>();
            p.wall_time = jp.value("wall_time", std::string{});
            r.trajectory.push_back(std::move(p));
        }
        for (const auto& jc : j.at("calls")) {
            CallEntry c;
            c.seq = jc.at("seq").get<int>();
            c.request_id = jc.at("request_id").get<std::string>();
            c.kind = parse_prompt_kind(jc.at("kind").get<std::string>());
            c.occurrence = jc.at("occurrence").get<int>();
            c.prompt_sha256 = jc.at("prompt_sha256").get<std::string>();
            c.response_sha256 = jc.at("response_sha256").get<std::string>();
            r.calls.push_back(std::move(c));
        }
        for (const auto& je : j.at("evals")) {
            EvalEntry e;
            e.seq = je.at("seq").get<int>();
            e.version_id = je.at("version_id").get<std::string>();
            e.job_id = je.at("job_id").get<std::string>();
            e.profile_requested = je.at("profile_requested").get<bool>();
            e.profile_captured = je.at("profile_captured").get<bool>();
            r.evals.push_back(std::move(e));
        }
        if (!j.at("terminal_phase").is_null())
            r.terminal_phase = parse_phase(j["terminal_phase"].get<std::string>());
        r.failure_reason = j.value("failure_reason", std::string{});
        r.best_version_id = optional_string(j, "best_version_id");
        r.final_depth = j.value("final_depth", 0);
    } catch (const json::exception& e) {
        throw StoreError(std::string("malformed session record: ") + e.what());
    }
    return r;
}

SessionRecord without_timestamps(SessionRecord r)
{
    for (auto& v : r.versions)
        v.created_at.clear();
    for (auto& p : r.trajectory)
        p.wall_time.clear();
    return r;
}

const KernelVersion& best_kernel(const SessionRecord& r)
{
    const KernelVersion* best = nullptr;
    double best_speedup = 0.0;
    // versions are in creation order, so strict '>' keeps the earliest on ties
    for (const auto& v : r.versions) {
        auto it = r.reports.find(v.id);
        if (it == r.reports.end() || !it->second.correct())
            continue;
        double s = it->second.timing->speedup;
        if (!best || s > best_speedup) {
            best = &v;
            best_speedup = s;
        }
    }
    if (!best)
        throw NoCorrectVersion(fmt::format("session {} has no correct kernel version", r.session_id));
    return *best;
}

SessionStore::SessionStore(std::string dir, int lock_fd, SessionRecord record)
    : dir_(std::move(dir)), lock_fd_(lock_fd), record_(std::move(record))
{
}

SessionStore::SessionStore(SessionStore&& other) noexcept
    : dir_(std::move(other.dir_)), lock_fd_(std::exchange(other.lock_fd_, -1)), record_(std::move(other.record_))
{
}

SessionStore::~SessionStore()
{
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

SessionStore SessionStore::create(const std::string& dir, std::string session_id, std::string task_id, json config)
{
    fs::create_directories(fs::path(dir) / "versions");
    fs::create_directories(fs::path(dir) / "calls");
    fs::create_directories(fs::path(dir) / "evals");
    auto lock_path = (fs::path(dir) / ".lock").string();
    int fd = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd < 0)
        throw IoError("cannot open " + lock_path);
    if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd);
        throw SessionLocked(fmt::format("session directory {} is locked by another writer", dir));
    }
    if (fs::exists(fs::path(dir) / "record.json")) {
        ::close(fd);
        throw StoreError(fmt::format("{} already holds a session record", dir));
    }
    SessionRecord record;
    record.session_id = std::move(session_id);
    record.task_id = std::move(task_id);
    record.config = std::move(config);
    SessionStore store(dir, fd, std::move(record));
    store.flush();
    return store;
}

std::string SessionStore::calls_dir() const
{
    return (fs::path(dir_) / "calls").string();
}

std::string SessionStore::evals_dir() const
{
    return (fs::path(dir_) / "evals").string();
}

void SessionStore::flush()
{
    write_file_atomic((fs::path(dir_) / "record.json").string(), to_json(record_, false).dump(2) + "\n");
}

void SessionStore::append_version(KernelVersion v)
{
    if (record_.find_version(v.id))
        throw DuplicateId("duplicate version id " + v.id);
    if (v.fingerprint != sha256_hex(v.source))
        throw StoreError("version " + v.id + " fingerprint does not match its source");
    if (record_.versions.empty()) {
        if (v.parent_id)
            throw UnknownVersionId(fmt::format("first version {} cannot have a parent", v.id));
    } else {
        if (!v.parent_id)
            throw StoreError(fmt::format("version {} needs a parent; only the first version is a root", v.id));
        if (!record_.find_version(*v.parent_id))
            throw UnknownVersionId(fmt::format("parent {} of version {} does not exist", *v.parent_id, v.id));
    }
    write_file_atomic(version_path(dir_, v.id), v.source);
    record_.versions.push_back(std::move(v));
    flush();
}

void SessionStore::append_report(const std::string& version_id, EvalReport report)
{
    if (!record_.find_version(version_id))
        throw UnknownVersionId("report for unknown version " + version_id);
    if (record_.reports.count(version_id))
        throw DuplicateId("version " + version_id + " already has a report");
    if (report.correct() != report.timing.has_value())
        throw StoreError("report timing must be present exactly when the status is Correct");
    record_.reports.emplace(version_id, std::move(report));
    flush();
}

void SessionStore::append_profile(const std::string& version_id, ProfileSummary profile)
{
    if (!record_.find_version(version_id))
        throw UnknownVersionId("profile for unknown version " + version_id);
    if (record_.profiles.count(version_id))
        throw DuplicateId("version " + version_id + " already has a profile");
    record_.profiles.emplace(version_id, std::move(profile));
    flush();
}

void SessionStore::append_trajectory_point(TrajectoryPoint p)
{
    auto it = record_.reports.find(p.version_id);
    if (!record_.find_version(p.version_id) || it == record_.reports.end())
        throw UnknownVersionId("trajectory point for unreported version " + p.version_id);
    if (p.correct != it->second.correct() || p.speedup != it->second.speedup())
        throw StoreError("trajectory point for " + p.version_id + " disagrees with its report");
    record_.trajectory.push_back(std::move(p));
    flush();
}

void SessionStore::append_call(CallEntry call)
{
    for (const auto& c : record_.calls)
        if (c.seq == call.seq)
            throw DuplicateId(fmt::format("duplicate call sequence {}", call.seq));
    record_.calls.push_back(std::move(call));
    flush();
}

void SessionStore::append_eval(EvalEntry entry, const json& job, const json& reply,
                               const std::optional<std::string>& profile_csv)
{
    if (!record_.find_version(entry.version_id))
        throw UnknownVersionId("evaluation of unknown version " + entry.version_id);
    for (const auto& e : record_.evals)
        if (e.seq == entry.seq)
            throw DuplicateId(fmt::format("duplicate evaluation sequence {}", entry.seq));
    auto stem = (fs::path(evals_dir()) / call_file_stem(entry.seq)).string();
    write_file_atomic(stem + ".job.json", job.dump(2) + "\n");
    entry.profile_captured = profile_csv.has_value();
    json journaled = reply;
    if (profile_csv) {
        write_file_atomic(stem + ".profile.csv", *profile_csv);
        // point at the journaled copy, relative to evals/
        journaled["profile_csv_path"] = call_file_stem(entry.seq) + ".profile.csv";
    }
    write_file_atomic(stem + ".reply.json", journaled.dump(2) + "\n");
    record_.evals.push_back(std::move(entry));
    flush();
}

void SessionStore::finalize(Phase terminal, std::string failure_reason, std::optional<std::string> best_version_id,
                            int final_depth)
{
    if (!is_terminal(terminal))
        throw StoreError(fmt::format("cannot finalize a session in phase {}", to_string(terminal)));
    record_.terminal_phase = terminal;
    record_.failure_reason = std::move(failure_reason);
    record_.best_version_id = std::move(best_version_id);
    record_.final_depth = final_depth;
    flush();
}

SessionRecord load_record(const std::string& dir)
{
    auto path = (fs::path(dir) / "record.json").string();
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw StoreError(fmt::format("{}: {}", path, e.what()));
    }
    auto record = record_from_json(j);
    for (auto& v : record.versions) {
        v.source = read_file(version_path(dir, v.id));
        if (sha256_hex(v.source) != v.fingerprint)
            throw StoreError(fmt::format("{} does not match its recorded fingerprint", version_path(dir, v.id)));
    }
    return record;
}

std::string render_speedup_table(const std::vector<SpeedupRow>& rows)
{
    std::string out = "| Kernel | Speedup |\n|:--|--:|\n";
    double sum = 0.0;
    int n = 0;
    for (const auto& row : rows) {
        if (row.speedup) {
            out += fmt::format("| {} | {:.2f} |\n", row.kernel, *row.speedup);
            sum += *row.speedup;
            ++n;
        } else {
            out += fmt::format("| {} | failed |\n", row.kernel);
        }
    }
    if (n > 0)
        out += fmt::format("| Arithmetic mean | {:.3f} |\n", sum / n);
    return out;
}

std::string export_report(const SessionRecord& r, ReportFormat format)
{
    if (format == ReportFormat::Json)
        return to_json(r, true).dump(2) + "\n";

    std::string kernel_name = r.task_id;
    std::string workload = "other";
    if (r.config.contains("task")) {
        kernel_name = r.config["task"].value("name", r.task_id);
        workload = r.config["task"].value("workload_class", workload);
    }

    std::string out = fmt::format("# Session {}\n\n", r.session_id);
    out += fmt::format("- Task: {} ({}, {})\n", kernel_name, r.task_id, workload);
    out += fmt::format("- Terminal phase: {}\n", r.terminal_phase ? to_string(*r.terminal_phase) : "running");
    out += fmt::format("- Final depth: {}\n", r.final_depth);
    std::optional<double> best_speedup;
    if (r.best_version_id) {
        out += fmt::format("- Best version: {}\n", *r.best_version_id);
        auto it = r.reports.find(*r.best_version_id);
        if (it != r.reports.end())
            best_speedup = it->second.speedup();
    }
    if (!r.failure_reason.empty())
        out += fmt::format("- Failure: {}\n", r.failure_reason);

    out += "\n## Speedup\n\n";
    std::vector<SpeedupRow> rows;
    if (best_speedup)
        rows.push_back({kernel_name, best_speedup});
    out += "| Kernel | Speedup |\n|:--|--:|\n";
    for (const auto& row : rows)
        out += fmt::format("| {} | {:.2f} |\n", row.kernel, *row.speedup);

    out += "\n## Depth series\n\n";
    out += "| Depth | Version | Correct | Speedup | Best so far | Profiling |\n";
    out += "|--:|:--|:--|--:|--:|:--|\n";
    std::optional<double> running;
    for (const auto& p : r.trajectory) {
        if (p.speedup && (!running || *p.speedup > *running))
            running = p.speedup;
        out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", p.depth, p.version_id, p.correct ? "yes" : "no",
                           p.speedup ? fmt::format("{:.2f}", *p.speedup) : "-",
                           running ? fmt::format("{:.2f}", *running) : "-", p.profiling_enabled ? "on" : "off");
    }
    return out;
}

} // namespace kagent
