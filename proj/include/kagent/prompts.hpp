#pragma once

#include "kagent/error.hpp"
#include "kagent/evaluator.hpp"
#include "kagent/profiler.hpp"
#include "kagent/task.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kagent {

KAGENT_DEFINE_ERROR(PromptError, Error);
KAGENT_DEFINE_ERROR(MissingReferenceSource, PromptError);
KAGENT_DEFINE_ERROR(TemplatePlaceholderMissing, PromptError);
KAGENT_DEFINE_ERROR(AssetPinMismatch, PromptError);

enum class PromptKind { InitialSynthesis, Diagnosis, Repair, Optimization };

std::string_view to_string(PromptKind k); // initial, diagnosis, repair, optimization
PromptKind parse_prompt_kind(std::string_view s);

struct Prompt {
    PromptKind kind = PromptKind::InitialSynthesis;
    std::string text;
};

inline constexpr std::string_view kSourcePlaceholder = "<NODE_PRV_SRC>";
inline constexpr std::string_view kProfilingSectionTitle = "PROFILING SUMMARY";

struct GuidelineAssets {
    std::string debug_guide;
    std::string optimization_template;
    std::string cute_exemplar;
    std::string initial_template;
};

struct AssetPin {
    std::string file;
    std::string sha256;
};

// Pins compiled in from assets/prompts/pins.sha256.
const std::vector<AssetPin>& asset_pins();

// Directory baked in at build time; KAGENT_ASSET_DIR overrides it.
std::string default_asset_dir();

// Verifies every pinned file's hash, then loads the assets. Leading lines
// starting with "#!" are asset comments and are stripped after hashing.
GuidelineAssets load_assets(const std::string& dir);

struct PromptOptions {
    std::size_t diagnosis_char_budget = 8000;
};

Prompt build_initial(const TaskSpec& task, const GuidelineAssets& assets);

// Precondition: report is not Correct.
Prompt build_diagnosis(std::string_view kernel, const EvalReport& report, const GuidelineAssets& assets);

Prompt build_repair(std::string_view kernel, std::string_view diagnosis, const PromptOptions& options = {});

Prompt build_optimization(std::string_view kernel, const GuidelineAssets& assets,
                          const std::optional<ProfileSummary>& profile);

// Documentation of the edit-block syntax embedded in every repair prompt.
std::string_view patch_syntax_help();

// Re-prompt after a format violation: the original prompt plus the problem.
Prompt with_format_reminder(const Prompt& original, std::string_view problem);

} // namespace kagent
