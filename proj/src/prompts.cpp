#include "kagent/prompts.hpp"

#include "kagent/patch.hpp"
#include "kagent/text.hpp"

#include "asset_pins.inc"

#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>

namespace kagent {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kRule =
    "===============================================================================";

std::string section(std::string_view title)
{
    return fmt::format("\n{}\n{}\n{}\n", kRule, title, kRule);
}

std::string strip_asset_comments(std::string text)
{
    while (text.rfind("#!", 0) == 0) {
        auto nl = text.find('\n');
        text.erase(0, nl == std::string::npos ? text.size() : nl + 1);
    }
    return text;
}

std::string trim_trailing_newlines(std::string_view s)
{
    while (!s.empty() && s.back() == '\n')
        s.remove_suffix(1);
    return std::string(s);
}

std::string describe_inputs(const TaskSpec& task)
{
    std::string out;
    for (std::size_t i = 0; i < task.inputs.size(); ++i) {
        const auto& in = task.inputs[i];
        out += fmt::format("- input {}: shape [{}], dtype {}, distribution {}\n", i, fmt::join(in.shape, ", "),
                           to_string(in.dtype), to_string(in.distribution));
    }
    return trim_trailing_newlines(out);
}

std::string failure_evidence(const EvalReport& report)
{
    std::string out;
    switch (report.status) {
    case EvalStatus::CompileError:
        out += "Status: compilation failed.\nCompiler diagnostics:\n";
        out += report.diagnostics;
        break;
    case EvalStatus::RuntimeError:
        out += "Status: runtime failure while running the kernel.\nRuntime trace:\n";
        out += report.diagnostics;
        break;
    case EvalStatus::Mismatch:
        out += "Status: output mismatch against the reference.\n";
        out += fmt::format("max abs error {}\n", report.max_abs_err);
        out += fmt::format("max rel error {}\n", report.max_rel_err);
        if (report.failing_seed)
            out += fmt::format("failing input seed {}\n", *report.failing_seed);
        if (!report.diagnostics.empty()) {
            out += "Mismatch details:\n";
            out += report.diagnostics;
        }
        break;
    case EvalStatus::Correct:
        break;
    }
    return trim_trailing_newlines(out);
}

} // namespace

std::string_view to_string(PromptKind k)
{
    switch (k) {
    case PromptKind::InitialSynthesis:
        return "initial";
    case PromptKind::Diagnosis:
        return "diagnosis";
    case PromptKind::Repair:
        return "repair";
    case PromptKind::Optimization:
        return "optimization";
    }
    return "?";
}

PromptKind parse_prompt_kind(std::string_view s)
{
    for (auto k : {PromptKind::InitialSynthesis, PromptKind::Diagnosis, PromptKind::Repair, PromptKind::Optimization})
        if (to_string(k) == s)
            return k;
    throw Error(fmt::format("unknown prompt kind '{}'", s));
}

const std::vector<AssetPin>& asset_pins()
{
    static const std::vector<AssetPin> pins = {KAGENT_ASSET_PINS};
    return pins;
}

std::string default_asset_dir()
{
    if (const char* env = std::getenv("KAGENT_ASSET_DIR"); env && *env)
        return env;
    return KAGENT_DEFAULT_ASSET_DIR;
}

GuidelineAssets load_assets(const std::string& dir)
{
    auto load = [&](std::string_view name) {
        auto path = (fs::path(dir) / name).string();
        std::string text;
        try {
            text = read_file(path);
        } catch (const IoError& e) {
            throw PromptError(e.what());
        }
        for (const auto& pin : asset_pins()) {
            if (pin.file == name && sha256_hex(text) != pin.sha256)
                throw AssetPinMismatch(fmt::format("{} does not match its pinned hash {}", path, pin.sha256));
        }
        return strip_asset_comments(std::move(text));
    };
    GuidelineAssets assets;
    assets.debug_guide = load("debug_guide.txt");
    assets.optimization_template = load("optimization_template.txt");
    assets.cute_exemplar = load("cute_exemplar.txt");
    assets.initial_template = load("initial_synthesis.txt");
    return assets;
}

Prompt build_initial(const TaskSpec& task, const GuidelineAssets& assets)
{
    if (task.reference_source.empty())
        throw MissingReferenceSource(fmt::format("task {} has no reference source", task.task_id));
    std::string text = assets.initial_template;
    // Substitute the exemplar and reference last so placeholder-like text
    // inside them is left alone.
    replace_all(text, "<TASK_ID>", task.display_name());
    replace_all(text, "<INPUT_SPEC>", describe_inputs(task));
    auto marker_ref = text.find("<REFERENCE_SRC>");
    auto marker_ex = text.find("<CUTE_EXEMPLAR>");
    if (marker_ref == std::string::npos || marker_ex == std::string::npos)
        throw TemplatePlaceholderMissing("initial synthesis template lacks <REFERENCE_SRC> or <CUTE_EXEMPLAR>");
    auto reference = trim_trailing_newlines(task.reference_source);
    auto exemplar = trim_trailing_newlines(assets.cute_exemplar);
    if (marker_ref > marker_ex) {
        text.replace(marker_ref, 15, reference);
        text.replace(marker_ex, 15, exemplar);
    } else {
        text.replace(marker_ex, 15, exemplar);
        text.replace(marker_ref, 15, reference);
    }
    return {PromptKind::InitialSynthesis, std::move(text)};
}

Prompt build_diagnosis(std::string_view kernel, const EvalReport& report, const GuidelineAssets& assets)
{
    if (report.correct())
        throw PromptError("diagnosis prompt requested for a kernel that passed validation");
    std::string text = assets.debug_guide;
    text += section("CURRENT KERNEL (line-numbered)");
    text += number_lines(kernel);
    text += section("FAILURE EVIDENCE");
    text += failure_evidence(report);
    text += '\n';
    text += section("YOUR TASK");
    text += "Follow the guide above to diagnose this failure. Explain the most likely root cause(s) and what\n"
            "must change to fix them, citing line numbers of the kernel above. Preserve the intent and CuTe\n"
            "structure of the kernel.\n"
            "Respond with analysis only. Do NOT write code, patches or a rewritten kernel.\n";
    return {PromptKind::Diagnosis, std::move(text)};
}

std::string_view patch_syntax_help()
{
    static const std::string help = fmt::format(
        "Express the fix as one or more edit blocks against the line numbers shown above.\n"
        "Each block is a header line, the new source lines verbatim (no line numbers), and a line\n"
        "containing only {0}:\n"
        "\n"
        "REPLACE <first> <last>     replaces lines first..last (inclusive) with the block lines\n"
        "DELETE <first> <last>      deletes lines first..last (inclusive); the block body is empty\n"
        "INSERT <line>              inserts the block lines before <line> (use last line + 1 to append)\n"
        "\n"
        "Example:\n"
        "REPLACE 12 13\n"
        "    int row = blockIdx.y * blockDim.y + threadIdx.y;\n"
        "{0}\n"
        "DELETE 20 20\n"
        "{0}\n"
        "INSERT 31\n"
        "    __syncthreads();\n"
        "{0}\n"
        "\n"
        "Rules: line numbers always refer to the ORIGINAL numbering above; edits must not overlap;\n"
        "at most one edit may touch any line.\n",
        kEditTerminator);
    return help;
}

Prompt build_repair(std::string_view kernel, std::string_view diagnosis, const PromptOptions& options)
{
    if (diagnosis.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw PromptError("repair prompt requires a non-empty diagnosis");
    std::string diag(diagnosis);
    if (diag.size() > options.diagnosis_char_budget) {
        diag.resize(options.diagnosis_char_budget);
        diag += fmt::format("\n[... diagnosis truncated to {} characters ...]", options.diagnosis_char_budget);
    }
    std::string text = "Repair the CUTE/CUDA kernel below using the diagnosis that follows.\n";
    text += section("CURRENT KERNEL (line-numbered)");
    text += number_lines(kernel);
    text += section("DIAGNOSIS");
    text += trim_trailing_newlines(diag);
    text += '\n';
    text += section("PATCH FORMAT");
    text += patch_syntax_help();
    text += section("YOUR TASK");
    text += "Apply the smallest change that fixes the diagnosed problem without changing the intent of the code.\n"
            "Output ONLY edit blocks in the format above. Do not output the whole kernel.\n";
    return {PromptKind::Repair, std::move(text)};
}

Prompt build_optimization(std::string_view kernel, const GuidelineAssets& assets,
                          const std::optional<ProfileSummary>& profile)
{
    std::string text = assets.optimization_template;
    auto pos = text.find(kSourcePlaceholder);
    if (pos == std::string::npos)
        throw TemplatePlaceholderMissing(fmt::format("optimization template lacks {}", kSourcePlaceholder));
    text.replace(pos, kSourcePlaceholder.size(), trim_trailing_newlines(kernel));
    if (profile) {
        text += section(kProfilingSectionTitle);
        text += "Hardware profile of the current kernel (dominant launch):\n";
        text += summarize_for_prompt(*profile);
    }
    return {PromptKind::Optimization, std::move(text)};
}

Prompt with_format_reminder(const Prompt& original, std::string_view problem)
{
    Prompt p = original;
    p.text += section("FORMAT PROBLEM WITH YOUR PREVIOUS RESPONSE");
    p.text += trim_trailing_newlines(problem);
    p.text += "\nRespond again, following the required output format exactly.\n";
    return p;
}

} // namespace kagent
