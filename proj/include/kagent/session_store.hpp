#pragma once

#include "kagent/error.hpp"
#include "kagent/evaluator.hpp"
#include "kagent/model_client.hpp"
#include "kagent/phase.hpp"
#include "kagent/profiler.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kagent {

KAGENT_DEFINE_ERROR(StoreError, Error);
KAGENT_DEFINE_ERROR(UnknownVersionId, StoreError);
KAGENT_DEFINE_ERROR(DuplicateId, StoreError);
KAGENT_DEFINE_ERROR(NoCorrectVersion, StoreError);
KAGENT_DEFINE_ERROR(SessionLocked, StoreError);

inline constexpr int kRecordSchemaVersion = 1;

enum class VersionOrigin { Initial, Repair, Optimization };
std::string_view to_string(VersionOrigin o);

struct KernelVersion {
    std::string id;
    std::optional<std::string> parent_id;
    std::string source;
    std::string fingerprint; // sha256 of source
    VersionOrigin origin = VersionOrigin::Initial;
    int depth_at_creation = 0;
    std::string created_at;

    bool operator==(const KernelVersion&) const = default;
};

// "v003-1a2b3c4d5e6f": creation order plus a fingerprint prefix.
std::string make_version_id(std::size_t seq, const std::string& fingerprint);

struct TrajectoryPoint {
    int depth = 0;
    std::optional<double> speedup; // only when correct
    bool correct = false;
    std::string version_id;
    bool profiling_enabled = false;
    std::string wall_time;

    bool operator==(const TrajectoryPoint&) const = default;
};

using CallEntry = JournalingModel::CallRecord;

// One executor exchange, journaled as evals/<seq>.job.json / .reply.json
// (and .profile.csv when the reply carried a profile export).
struct EvalEntry {
    int seq = 0;
    std::string version_id;
    std::string job_id;
    bool profile_requested = false;
    bool profile_captured = false;

    bool operator==(const EvalEntry&) const = default;
};

struct SessionRecord {
    int schema_version = kRecordSchemaVersion;
    std::string session_id;
    std::string task_id;
    nlohmann::json config = nlohmann::json::object();
    std::vector<KernelVersion> versions;
    std::map<std::string, EvalReport> reports;         // version_id -> first evaluation
    std::map<std::string, ProfileSummary> profiles;    // version_id -> profile summary
    std::vector<TrajectoryPoint> trajectory;
    std::vector<CallEntry> calls;
    std::vector<EvalEntry> evals;
    std::optional<Phase> terminal_phase;
    std::string failure_reason;
    std::optional<std::string> best_version_id;
    int final_depth = 0;

    const KernelVersion* find_version(const std::string& id) const;
    bool operator==(const SessionRecord&) const;
};

nlohmann::json to_json(const SessionRecord& r, bool include_sources);
SessionRecord record_from_json(const nlohmann::json& j);

// Same record with every timestamp blanked, for replay comparisons.
SessionRecord without_timestamps(SessionRecord r);

// The Correct version with the highest speedup; earliest creation wins ties.
const KernelVersion& best_kernel(const SessionRecord& r);

// Append-only writer for one session directory. Holds an exclusive lock on
// <dir>/.lock for its lifetime. Every append writes its artifact files and
// then atomically rewrites record.json before returning.
class SessionStore {
public:
    // Fails if <dir>/record.json already exists.
    static SessionStore create(const std::string& dir, std::string session_id, std::string task_id,
                               nlohmann::json config);

    SessionStore(SessionStore&& other) noexcept;
    SessionStore& operator=(SessionStore&&) = delete;
    SessionStore(const SessionStore&) = delete;
    ~SessionStore();

    const SessionRecord& record() const { return record_; }
    const std::string& dir() const { return dir_; }
    std::string calls_dir() const;
    std::string evals_dir() const;

    void append_version(KernelVersion v);
    void append_report(const std::string& version_id, EvalReport report);
    void append_profile(const std::string& version_id, ProfileSummary profile);
    void append_trajectory_point(TrajectoryPoint p);
    void append_call(CallEntry call);
    // A captured profile is copied to evals/<seq>.profile.csv and the journaled
    // reply refers to that copy.
    void append_eval(EvalEntry entry, const nlohmann::json& job, const nlohmann::json& reply,
                     const std::optional<std::string>& profile_csv);
    void finalize(Phase terminal, std::string failure_reason, std::optional<std::string> best_version_id,
                  int final_depth);

private:
    SessionStore(std::string dir, int lock_fd, SessionRecord record);
    void flush();

    std::string dir_;
    int lock_fd_ = -1;
    SessionRecord record_;
};

// Reads record.json and the version sources it references.
SessionRecord load_record(const std::string& dir);

enum class ReportFormat { Json, Markdown };

struct SpeedupRow {
    std::string kernel;
    std::optional<double> speedup; // nullopt: no correct kernel
};

// "| Kernel | Speedup |" table, two decimals per row, plus an arithmetic-mean
// row (three decimals) over the rows that have a speedup.
std::string render_speedup_table(const std::vector<SpeedupRow>& rows);

std::string export_report(const SessionRecord& r, ReportFormat format);

} // namespace kagent
