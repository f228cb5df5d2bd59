#pragma once

#include "kagent/error.hpp"
#include "kagent/prompts.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace kagent {

KAGENT_DEFINE_ERROR(ModelError, Error);
KAGENT_DEFINE_ERROR(ModelUnavailable, ModelError);
KAGENT_DEFINE_ERROR(ScriptExhausted, ModelError);
KAGENT_DEFINE_ERROR(ResponseTooLarge, ModelError);
KAGENT_DEFINE_ERROR(NoCodeBlock, Error);

struct ModelRequest {
    std::string prompt;
    PromptKind kind = PromptKind::InitialSynthesis;
    std::size_t max_output_chars = 200'000;
    double temperature = 1.0;
    std::string request_id;
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual std::string complete(const ModelRequest& request) = 0;
};

// (kind, 1-based occurrence) -> response text.
using ScriptKey = std::pair<PromptKind, int>;
using ScriptedResponseSet = std::map<ScriptKey, std::string>;

// Fixture file: {"responses": [{"kind": "initial", "text": "..."} |
// {"kind": "repair", "text_file": "rel/path"}, ...]}. Occurrence indices
// follow file order per kind unless an entry gives "occurrence".
ScriptedResponseSet load_script(const std::string& path);

// Replays responses keyed by (kind, occurrence); a missing key is a hard
// error so replays cannot silently drift.
class ScriptedModel final : public ModelClient {
public:
    explicit ScriptedModel(ScriptedResponseSet responses);

    std::string complete(const ModelRequest& request) override;

    int occurrences(PromptKind kind) const;

private:
    ScriptedResponseSet responses_;
    std::map<PromptKind, int> seen_;
};

struct RemoteModelConfig {
    std::string endpoint; // e.g. https://host/v1/chat/completions
    std::string model;
    std::string api_key;  // from KERNEL_AGENT_API_KEY
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds request_timeout{600};
};

// One chat-completions call per request (a single user message), retried
// with exponential backoff.
class RemoteModel final : public ModelClient {
public:
    explicit RemoteModel(RemoteModelConfig config);

    std::string complete(const ModelRequest& request) override;

    // Request body sent for `request`; exposed for wire-format tests.
    nlohmann::json request_body(const ModelRequest& request) const;

    int attempts_made() const { return attempts_; }

private:
    RemoteModelConfig config_;
    int attempts_ = 0;
};

// Writes calls/<seq>.request.txt before forwarding and calls/<seq>.response.txt
// after, so every exchange is on disk before the caller acts on it.
class JournalingModel final : public ModelClient {
public:
    struct CallRecord {
        int seq = 0;
        std::string request_id;
        PromptKind kind = PromptKind::InitialSynthesis;
        int occurrence = 0;
        std::string prompt_sha256;
        std::string response_sha256;
    };
    using Observer = std::function<void(const CallRecord&)>;

    JournalingModel(ModelClient& inner, std::string calls_dir, Observer observer = {});

    std::string complete(const ModelRequest& request) override;

    int calls() const { return seq_; }

private:
    ModelClient& inner_;
    std::string dir_;
    Observer observer_;
    int seq_ = 0;
    std::map<PromptKind, int> occurrences_;
};

std::string call_file_stem(int seq); // "0001"

// Contents of the last complete fenced block, newline-terminated; the fence's
// language tag is ignored. Throws NoCodeBlock.
std::string extract_code_block(std::string_view text);

} // namespace kagent
