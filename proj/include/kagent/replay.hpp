#pragma once

#include "kagent/error.hpp"
#include "kagent/evaluator.hpp"
#include "kagent/model_client.hpp"
#include "kagent/session_store.hpp"
#include "kagent/workflow.hpp"

#include <optional>
#include <string>

namespace kagent {

KAGENT_DEFINE_ERROR(ReplayError, Error);
// The re-run asked for something the journal did not record.
KAGENT_DEFINE_ERROR(Divergence, ReplayError);
// The journal ends, or is missing files, before the re-run does.
KAGENT_DEFINE_ERROR(JournalIncomplete, ReplayError);

// Serves responses from <dir>/calls in order. Each request must match the
// journaled kind and prompt hash; each response file must still hash to the
// recorded value.
class ReplayModel final : public ModelClient {
public:
    ReplayModel(std::string session_dir, SessionRecord record);

    std::string complete(const ModelRequest& request) override;

    int served() const { return next_; }

private:
    std::string dir_;
    SessionRecord record_;
    int next_ = 0;
};

// Serves <dir>/evals/NNNN.reply.json for jobs identical to the journaled
// NNNN.job.json; profile exports come from the journaled CSV copies.
class ReplayExecutor final : public Executor {
public:
    explicit ReplayExecutor(std::string session_dir);

    nlohmann::json run(const nlohmann::json& job, std::chrono::milliseconds timeout) override;

private:
    std::string dir_;
    int next_ = 0;
};

// JSON-pointer path of the first field where the two records differ,
// ignoring timestamps; nullopt when they are identical.
std::optional<std::string> first_difference(const SessionRecord& a, const SessionRecord& b);

struct ReplayResult {
    SessionRecord original;
    SessionRecord replayed;
    std::optional<std::string> difference;

    bool identical() const { return !difference; }
};

// Re-runs the session journaled in `session_dir` into `out_dir` using only
// the journal and the configuration snapshot in its record.
ReplayResult replay_session(const std::string& session_dir, const std::string& out_dir,
                            const GuidelineAssets& assets, std::ostream* progress = nullptr);

} // namespace kagent
