#pragma once

#include "kagent/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kagent {

enum class WorkloadClass { MatMulLike, ActivationElementwise, Other };
enum class DType { F32, F16 };
enum class Distribution { Normal, Uniform };

std::string_view to_string(WorkloadClass c);
std::string_view to_string(DType d);
std::string_view to_string(Distribution d);
WorkloadClass parse_workload_class(std::string_view s);

struct InputTensor {
    std::vector<std::int64_t> shape;
    DType dtype = DType::F32;
    Distribution distribution = Distribution::Normal;

    bool operator==(const InputTensor&) const = default;
};

struct CorrectnessConfig {
    double rtol = 1e-3;
    double atol = 1e-3;
    int num_random_trials = 5;
    std::uint64_t rng_seed = 1000;

    bool operator==(const CorrectnessConfig&) const = default;
};

struct TimingConfig {
    int warmup_iters = 10;
    int timed_iters = 100;
    bool synchronize_each_iter = true;

    bool operator==(const TimingConfig&) const = default;
};

void validate(const CorrectnessConfig& cc);
void validate(const TimingConfig& tc);

struct TaskSpec {
    std::string task_id;
    std::string name; // display name in report tables; defaults to task_id
    WorkloadClass workload_class = WorkloadClass::Other;
    std::string reference_source_path;
    std::string reference_source;
    std::vector<InputTensor> inputs;
    // Executor job mode: "evaluate" (GPU) or "evaluate_stub" (host functions).
    std::string harness_mode = "evaluate";
    std::optional<double> rtol;
    std::optional<double> atol;
    std::optional<int> num_random_trials;
    std::optional<std::uint64_t> rng_seed;
    std::optional<int> warmup_iters;
    std::optional<int> timed_iters;
    std::optional<bool> synchronize_each_iter;

    const std::string& display_name() const { return name.empty() ? task_id : name; }

    // Task overrides applied on top of `base`.
    CorrectnessConfig correctness(CorrectnessConfig base) const;
    TimingConfig timing(TimingConfig base) const;
};

// Loads a JSON manifest; reference_source is resolved relative to the
// manifest's directory and read into memory. Throws ConfigError with the
// file name (and line, for syntax errors).
TaskSpec load_manifest(const std::string& path);

// Structural checks shared by load_manifest and programmatic construction.
void validate(const TaskSpec& task);

nlohmann::json to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CorrectnessConfig& cc);
nlohmann::json to_json(const TimingConfig& tc);
CorrectnessConfig correctness_from_json(const nlohmann::json& j);
TimingConfig timing_from_json(const nlohmann::json& j);

} // namespace kagent
