#pragma once

#include "kagent/error.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kagent {

KAGENT_DEFINE_ERROR(PatchError, Error);
KAGENT_DEFINE_ERROR(MalformedPatch, PatchError);
KAGENT_DEFINE_ERROR(EmptyPatch, PatchError);
KAGENT_DEFINE_ERROR(FingerprintMismatch, PatchError);
KAGENT_DEFINE_ERROR(RangeOutOfBounds, PatchError);
KAGENT_DEFINE_ERROR(OverlappingEdits, PatchError);

enum class EditKind { Insert, Delete, Replace };

// Line numbers are 1-based against the base source. Insert places new_lines
// before start_line (start_line == line_count + 1 appends); end_line is
// ignored for Insert and set equal to start_line.
struct PatchEdit {
    EditKind kind = EditKind::Replace;
    std::size_t start_line = 0;
    std::size_t end_line = 0;
    std::vector<std::string> new_lines;

    static PatchEdit insert(std::size_t before_line, std::vector<std::string> lines);
    static PatchEdit remove(std::size_t first, std::size_t last);
    static PatchEdit replace(std::size_t first, std::size_t last, std::vector<std::string> lines);

    bool operator==(const PatchEdit&) const = default;
};

struct Patch {
    std::string base_version_id;
    std::string base_fingerprint;
    std::vector<PatchEdit> edits; // sorted by start_line

    bool operator==(const Patch&) const = default;
};

struct DiffStat {
    std::size_t inserted = 0;
    std::size_t deleted = 0;
    std::size_t replaced = 0;

    bool operator==(const DiffStat&) const = default;
};

inline constexpr std::string_view kEditTerminator = "END_EDIT";

// Parses the edit-block syntax (see docs/patch-format.md). Lines outside edit
// blocks are ignored so narration and code fences around the blocks are
// harmless. The returned patch has no base binding; see bind_patch().
Patch parse_patch(std::string_view text);

Patch bind_patch(Patch patch, std::string base_version_id, std::string_view base_source);

// Throws FingerprintMismatch, RangeOutOfBounds or OverlappingEdits before
// touching anything; the source is never partially modified.
std::string apply_patch(std::string_view source, const Patch& patch);

DiffStat diff_stat(const Patch& patch);

// Renders edits back into the wire syntax.
std::string format_patch(const Patch& patch);

std::string_view to_string(EditKind kind);

} // namespace kagent
