#include "kagent/task.hpp"

#include "kagent/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>

namespace kagent {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(WorkloadClass c)
{
    switch (c) {
    case WorkloadClass::MatMulLike:
        return "matmul";
    case WorkloadClass::ActivationElementwise:
        return "activation";
    case WorkloadClass::Other:
        return "other";
    }
    return "other";
}

std::string_view to_string(DType d)
{
    return d == DType::F16 ? "f16" : "f32";
}

std::string_view to_string(Distribution d)
{
    return d == Distribution::Uniform ? "uniform" : "normal";
}

WorkloadClass parse_workload_class(std::string_view s)
{
    if (s == "matmul")
        return WorkloadClass::MatMulLike;
    if (s == "activation")
        return WorkloadClass::ActivationElementwise;
    if (s == "other")
        return WorkloadClass::Other;
    throw ConfigError(fmt::format("unknown workload_class '{}' (expected matmul, activation or other)", s));
}

namespace {

DType parse_dtype(std::string_view s)
{
    if (s == "f32")
        return DType::F32;
    if (s == "f16")
        return DType::F16;
    throw ConfigError(fmt::format("unknown dtype '{}' (expected f32 or f16)", s));
}

Distribution parse_distribution(std::string_view s)
{
    if (s == "normal")
        return Distribution::Normal;
    if (s == "uniform")
        return Distribution::Uniform;
    throw ConfigError(fmt::format("unknown distribution '{}' (expected normal or uniform)", s));
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out)
{
    if (j.contains(key) && !j[key].is_null())
        out = j[key].get<T>();
}

template <class T>
void write_optional(json& j, const char* key, const std::optional<T>& value)
{
    if (value)
        j[key] = *value;
}

} // namespace

void validate(const CorrectnessConfig& cc)
{
    if (!(cc.rtol > 0) || !(cc.atol > 0))
        throw ConfigError("rtol and atol must be positive");
    if (cc.num_random_trials < 1)
        throw ConfigError("num_random_trials must be at least 1");
}

void validate(const TimingConfig& tc)
{
    if (tc.warmup_iters < 1)
        throw ConfigError("warmup_iters must be at least 1");
    if (tc.timed_iters < 1)
        throw ConfigError("timed_iters must be at least 1");
}

CorrectnessConfig TaskSpec::correctness(CorrectnessConfig base) const
{
    if (rtol)
        base.rtol = *rtol;
    if (atol)
        base.atol = *atol;
    if (num_random_trials)
        base.num_random_trials = *num_random_trials;
    if (rng_seed)
        base.rng_seed = *rng_seed;
    return base;
}

TimingConfig TaskSpec::timing(TimingConfig base) const
{
    if (warmup_iters)
        base.warmup_iters = *warmup_iters;
    if (timed_iters)
        base.timed_iters = *timed_iters;
    if (synchronize_each_iter)
        base.synchronize_each_iter = *synchronize_each_iter;
    return base;
}

void validate(const TaskSpec& task)
{
    if (task.task_id.empty())
        throw ConfigError("task_id is required");
    if (task.reference_source.empty())
        throw ConfigError(fmt::format("task {}: reference source is empty", task.task_id));
    if (task.inputs.empty())
        throw ConfigError(fmt::format("task {}: at least one input tensor is required", task.task_id));
    for (std::size_t i = 0; i < task.inputs.size(); ++i) {
        const auto& shape = task.inputs[i].shape;
        if (shape.empty() || std::any_of(shape.begin(), shape.end(), [](auto d) { return d <= 0; }))
            throw ConfigError(fmt::format("task {}: inputs[{}] shape must be non-empty and positive", task.task_id, i));
    }
    validate(task.correctness({}));
    validate(task.timing({}));
}

json to_json(const TaskSpec& task)
{
    json inputs = json::array();
    for (const auto& in : task.inputs)
        inputs.push_back({{"shape", in.shape},
                          {"dtype", to_string(in.dtype)},
                          {"distribution", to_string(in.distribution)}});
    json j = {{"task_id", task.task_id},
              {"name", task.display_name()},
              {"workload_class", to_string(task.workload_class)},
              {"reference_source_path", task.reference_source_path},
              {"reference_source", task.reference_source},
              {"inputs", inputs},
              {"harness_mode", task.harness_mode}};
    json correctness = json::object();
    write_optional(correctness, "rtol", task.rtol);
    write_optional(correctness, "atol", task.atol);
    write_optional(correctness, "trials", task.num_random_trials);
    write_optional(correctness, "seed", task.rng_seed);
    json timing = json::object();
    write_optional(timing, "warmup_iters", task.warmup_iters);
    write_optional(timing, "timed_iters", task.timed_iters);
    write_optional(timing, "synchronize_each_iter", task.synchronize_each_iter);
    j["correctness"] = correctness;
    j["timing"] = timing;
    return j;
}

TaskSpec task_from_json(const json& j)
{
    TaskSpec task;
    try {
        task.task_id = j.at("task_id").get<std::string>();
        task.name = j.value("name", std::string{});
        task.workload_class = parse_workload_class(j.value("workload_class", std::string{"other"}));
        task.reference_source_path = j.value("reference_source_path", std::string{});
        task.reference_source = j.value("reference_source", std::string{});
        task.harness_mode = j.value("harness_mode", std::string{"evaluate"});
        if (task.harness_mode != "evaluate" && task.harness_mode != "evaluate_stub")
            throw ConfigError("harness_mode must be evaluate or evaluate_stub");
        for (const auto& in : j.at("inputs")) {
            InputTensor t;
            t.shape = in.at("shape").get<std::vector<std::int64_t>>();
            t.dtype = parse_dtype(in.value("dtype", std::string{"f32"}));
            t.distribution = parse_distribution(in.value("distribution", std::string{"normal"}));
            task.inputs.push_back(std::move(t));
        }
        if (j.contains("correctness")) {
            const auto& c = j["correctness"];
            read_optional(c, "rtol", task.rtol);
            read_optional(c, "atol", task.atol);
            read_optional(c, "trials", task.num_random_trials);
            read_optional(c, "seed", task.rng_seed);
        }
        if (j.contains("timing")) {
            const auto& t = j["timing"];
            read_optional(t, "warmup_iters", task.warmup_iters);
            read_optional(t, "timed_iters", task.timed_iters);
            read_optional(t, "synchronize_each_iter", task.synchronize_each_iter);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("task manifest: ") + e.what());
    }
    return task;
}

TaskSpec load_manifest(const std::string& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(e.byte, text.size())), '\n');
        throw ConfigError(fmt::format("{}:{}: {}", path, line, e.what()));
    }
    TaskSpec task;
    try {
        task = task_from_json(j);
        if (task.reference_source.empty()) {
            if (task.reference_source_path.empty())
                throw ConfigError("reference_source_path is required");
            fs::path ref = task.reference_source_path;
            if (ref.is_relative())
                ref = fs::path(path).parent_path() / ref;
            if (!fs::exists(ref))
                throw ConfigError(fmt::format("reference source {} does not exist", ref.string()));
            task.reference_source = read_file(ref.string());
        }
        validate(task);
    } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    return task;
}

json to_json(const CorrectnessConfig& cc)
{
    return {{"rtol", cc.rtol}, {"atol", cc.atol}, {"trials", cc.num_random_trials}, {"seed", cc.rng_seed}};
}

json to_json(const TimingConfig& tc)
{
    return {{"warmup_iters", tc.warmup_iters},
            {"timed_iters", tc.timed_iters},
            {"synchronize_each_iter", tc.synchronize_each_iter}};
}

CorrectnessConfig correctness_from_json(const json& j)
{
    CorrectnessConfig cc;
    cc.rtol = j.value("rtol", cc.rtol);
    cc.atol = j.value("atol", cc.atol);
    cc.num_random_trials = j.value("trials", cc.num_random_trials);
    cc.rng_seed = j.value("seed", cc.rng_seed);
    return cc;
}

TimingConfig timing_from_json(const json& j)
{
    TimingConfig tc;
    tc.warmup_iters = j.value("warmup_iters", tc.warmup_iters);
    tc.timed_iters = j.value("timed_iters", tc.timed_iters);
    tc.synchronize_each_iter = j.value("synchronize_each_iter", tc.synchronize_each_iter);
    return tc;
}

} // namespace kagent
