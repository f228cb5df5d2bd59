#include "kagent/model_client.hpp"

#include "kagent/text.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include <filesystem>
#include <thread>

namespace kagent {

using nlohmann::json;
namespace fs = std::filesystem;

ScriptedResponseSet load_script(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    if (!j.contains("responses") || !j["responses"].is_array())
        throw ConfigError(path + ": scripted model fixture needs a 'responses' array");
    ScriptedResponseSet set;
    std::map<PromptKind, int> counters;
    for (const auto& entry : j["responses"]) {
        PromptKind kind;
        try {
            kind = parse_prompt_kind(entry.at("kind").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(fmt::format("{}: {}", path, e.what()));
        }
        int occurrence = entry.contains("occurrence") ? entry["occurrence"].get<int>() : counters[kind] + 1;
        counters[kind] = std::max(counters[kind], occurrence);
        std::string text;
        if (entry.contains("text")) {
            text = entry["text"].get<std::string>();
        } else if (entry.contains("text_file")) {
            fs::path p = entry["text_file"].get<std::string>();
            if (p.is_relative())
                p = fs::path(path).parent_path() / p;
            try {
                text = read_file(p.string());
            } catch (const IoError& e) {
                throw ConfigError(fmt::format("{}: {}", path, e.what()));
            }
        } else {
            throw ConfigError(fmt::format("{}: response entry needs 'text' or 'text_file'", path));
        }
        if (!set.emplace(ScriptKey{kind, occurrence}, std::move(text)).second)
            throw ConfigError(fmt::format("{}: duplicate response for ({}, {})", path, to_string(kind), occurrence));
    }
    return set;
}

ScriptedModel::ScriptedModel(ScriptedResponseSet responses) : responses_(std::move(responses)) {}

std::string ScriptedModel::complete(const ModelRequest& request)
{
    int occurrence = ++seen_[request.kind];
    auto it = responses_.find({request.kind, occurrence});
    if (it == responses_.end())
        throw ScriptExhausted(fmt::format("no scripted response for ({}, {})", to_string(request.kind), occurrence));
    if (it->second.size() > request.max_output_chars)
        throw ResponseTooLarge(fmt::format("scripted response ({}, {}) exceeds {} characters", to_string(request.kind),
                                           occurrence, request.max_output_chars));
    return it->second;
}

int ScriptedModel::occurrences(PromptKind kind) const
{
    auto it = seen_.find(kind);
    return it == seen_.end() ? 0 : it->second;
}

RemoteModel::RemoteModel(RemoteModelConfig config) : config_(std::move(config))
{
    if (config_.endpoint.empty())
        throw ConfigError("remote model needs an endpoint URL (config key model-endpoint)");
    if (config_.model.empty())
        throw ConfigError("remote model needs a model name (config key model-name)");
    if (config_.max_attempts < 1)
        throw ConfigError("remote model needs at least one attempt");
}

json RemoteModel::request_body(const ModelRequest& request) const
{
    return {{"model", config_.model},
            {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature}};
}

namespace {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url)
{
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("model endpoint must be an absolute http(s) URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

std::string RemoteModel::complete(const ModelRequest& request)
{
    auto url = split_url(config_.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(config_.request_timeout);
    client.set_write_timeout(std::chrono::seconds(60));
    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    auto body = request_body(request).dump();

    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        ++attempts_;
        auto res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
        } else if (res->status != 200) {
            last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 500));
        } else {
            json reply;
            try {
                reply = json::parse(res->body);
                auto content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
                if (content.size() > request.max_output_chars)
                    throw ResponseTooLarge(fmt::format("model response of {} characters exceeds the {} limit",
                                                       content.size(), request.max_output_chars));
                return content;
            } catch (const json::exception& e) {
                last_error = std::string("malformed chat-completions reply: ") + e.what();
            }
        }
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw ModelUnavailable(fmt::format("model endpoint {} failed after {} attempts: {}", config_.endpoint,
                                       config_.max_attempts, last_error));
}

std::string call_file_stem(int seq)
{
    return fmt::format("{:04d}", seq);
}

JournalingModel::JournalingModel(ModelClient& inner, std::string calls_dir, Observer observer)
    : inner_(inner), dir_(std::move(calls_dir)), observer_(std::move(observer))
{
    fs::create_directories(dir_);
}

std::string JournalingModel::complete(const ModelRequest& request)
{
    CallRecord call;
    call.seq = ++seq_;
    call.request_id = request.request_id;
    call.kind = request.kind;
    call.occurrence = ++occurrences_[request.kind];
    call.prompt_sha256 = sha256_hex(request.prompt);
    auto stem = (fs::path(dir_) / call_file_stem(call.seq)).string();
    write_file_atomic(stem + ".request.txt", request.prompt);
    auto response = inner_.complete(request);
    write_file_atomic(stem + ".response.txt", response);
    call.response_sha256 = sha256_hex(response);
    if (observer_)
        observer_(call);
    return response;
}

std::string extract_code_block(std::string_view text)
{
    auto lines = split_lines(text).lines;
    std::optional<std::string> last;
    bool open = false;
    std::string current;
    bool first_line = true;
    for (const auto& raw : lines) {
        std::string_view line = raw;
        auto b = line.find_first_not_of(" \t");
        bool fence = b != std::string_view::npos && line.substr(b, 3) == "```";
        if (fence) {
            if (!open) {
                open = true;
                current.clear();
                first_line = true;
            } else {
                open = false;
                if (current.find_first_not_of(" \t\r\n") != std::string::npos)
                    last = current + '\n';
            }
            continue;
        }
        if (open) {
            if (!first_line)
                current += '\n';
            current += raw;
            first_line = false;
        }
    }
    if (!last)
        throw NoCodeBlock("response contains no complete fenced code block");
    return *last;
}

} // namespace kagent
