#include "kagent/patch.hpp"

#include "kagent/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <optional>

namespace kagent {

PatchEdit PatchEdit::insert(std::size_t before_line, std::vector<std::string> lines)
{
    return {EditKind::Insert, before_line, before_line, std::move(lines)};
}

PatchEdit PatchEdit::remove(std::size_t first, std::size_t last)
{
    return {EditKind::Delete, first, last, {}};
}

PatchEdit PatchEdit::replace(std::size_t first, std::size_t last, std::vector<std::string> lines)
{
    return {EditKind::Replace, first, last, std::move(lines)};
}

std::string_view to_string(EditKind kind)
{
    switch (kind) {
    case EditKind::Insert:
        return "INSERT";
    case EditKind::Delete:
        return "DELETE";
    case EditKind::Replace:
        return "REPLACE";
    }
    return "?";
}

namespace {

std::string_view strip_cr(std::string_view line)
{
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    return line;
}

std::vector<std::string_view> tokenize(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
            ++i;
        auto start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t')
            ++i;
        if (i > start)
            out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::optional<EditKind> header_keyword(std::string_view token)
{
    if (token == "REPLACE")
        return EditKind::Replace;
    if (token == "DELETE")
        return EditKind::Delete;
    if (token == "INSERT")
        return EditKind::Insert;
    return std::nullopt;
}

std::size_t parse_line_number(std::string_view token, std::size_t patch_line)
{
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw MalformedPatch(fmt::format("patch line {}: '{}' is not a line number", patch_line, token));
    if (value == 0)
        throw MalformedPatch(fmt::format("patch line {}: line numbers are 1-based", patch_line));
    return value;
}

PatchEdit parse_header(const std::vector<std::string_view>& tokens, EditKind kind, std::size_t patch_line)
{
    std::size_t expected = kind == EditKind::Insert ? 2 : 3;
    if (tokens.size() != expected)
        throw MalformedPatch(fmt::format("patch line {}: {} takes {} line number(s)", patch_line,
                                         to_string(kind), expected - 1));
    PatchEdit edit;
    edit.kind = kind;
    edit.start_line = parse_line_number(tokens[1], patch_line);
    edit.end_line = kind == EditKind::Insert ? edit.start_line : parse_line_number(tokens[2], patch_line);
    if (edit.end_line < edit.start_line)
        throw MalformedPatch(fmt::format("patch line {}: {} {} {} ends before it starts", patch_line,
                                         to_string(kind), edit.start_line, edit.end_line));
    return edit;
}

// Insert occupies the single slot [n, n] for overlap purposes, so two inserts
// at the same anchor, or an insert in front of a replaced line, conflict.
bool overlaps(const PatchEdit& a, const PatchEdit& b)
{
    return a.start_line <= b.end_line && b.start_line <= a.end_line;
}

void splice(std::vector<std::string>& lines, const PatchEdit& edit)
{
    auto first = lines.begin() + static_cast<std::ptrdiff_t>(edit.start_line - 1);
    if (edit.kind == EditKind::Insert) {
        lines.insert(first, edit.new_lines.begin(), edit.new_lines.end());
        return;
    }
    auto last = lines.begin() + static_cast<std::ptrdiff_t>(edit.end_line);
    auto pos = lines.erase(first, last);
    lines.insert(pos, edit.new_lines.begin(), edit.new_lines.end());
}

} // namespace

Patch parse_patch(std::string_view text)
{
    Patch patch;
    auto lines = split_lines(text).lines;
    std::size_t i = 0;
    while (i < lines.size()) {
        auto line = strip_cr(lines[i]);
        auto tokens = tokenize(line);
        auto kind = tokens.empty() ? std::nullopt : header_keyword(tokens[0]);
        if (!kind) {
            ++i;
            continue;
        }
        auto header_line = i + 1;
        auto edit = parse_header(tokens, *kind, header_line);
        ++i;
        bool terminated = false;
        for (; i < lines.size(); ++i) {
            if (strip_cr(lines[i]) == kEditTerminator) {
                terminated = true;
                ++i;
                break;
            }
            edit.new_lines.push_back(lines[i]);
        }
        if (!terminated)
            throw MalformedPatch(fmt::format("patch line {}: {} block is missing its {} line", header_line,
                                             to_string(edit.kind), kEditTerminator));
        if (edit.kind == EditKind::Delete && !edit.new_lines.empty())
            throw MalformedPatch(fmt::format("patch line {}: DELETE block must have an empty body", header_line));
        if (edit.kind != EditKind::Delete && edit.new_lines.empty())
            throw MalformedPatch(fmt::format("patch line {}: {} block has no lines", header_line,
                                             to_string(edit.kind)));
        patch.edits.push_back(std::move(edit));
    }
    if (patch.edits.empty())
        throw EmptyPatch("response contains no edit blocks");
    std::stable_sort(patch.edits.begin(), patch.edits.end(),
                     [](const PatchEdit& a, const PatchEdit& b) { return a.start_line < b.start_line; });
    return patch;
}

Patch bind_patch(Patch patch, std::string base_version_id, std::string_view base_source)
{
    patch.base_version_id = std::move(base_version_id);
    patch.base_fingerprint = sha256_hex(base_source);
    return patch;
}

std::string apply_patch(std::string_view source, const Patch& patch)
{
    if (patch.base_fingerprint != sha256_hex(source))
        throw FingerprintMismatch(fmt::format("patch targets {} but the source hashes differently",
                                              patch.base_version_id.empty() ? "<unbound>" : patch.base_version_id));

    auto lines = split_lines(source);
    const auto count = lines.lines.size();

    std::vector<const PatchEdit*> order;
    order.reserve(patch.edits.size());
    for (const auto& edit : patch.edits) {
        bool ok = edit.kind == EditKind::Insert
                      ? edit.start_line >= 1 && edit.start_line <= count + 1
                      : edit.start_line >= 1 && edit.start_line <= edit.end_line && edit.end_line <= count;
        if (!ok)
            throw RangeOutOfBounds(fmt::format("{} {}-{} is outside a {}-line source", to_string(edit.kind),
                                               edit.start_line, edit.end_line, count));
        order.push_back(&edit);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const PatchEdit* a, const PatchEdit* b) { return a->start_line < b->start_line; });
    // Sorted by start, so an edit overlaps an earlier one iff it overlaps
    // the earlier edit reaching furthest.
    const PatchEdit* widest = order.empty() ? nullptr : order[0];
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (overlaps(*widest, *order[k]))
            throw OverlappingEdits(fmt::format("{} at line {} overlaps {} at line {}", to_string(widest->kind),
                                               widest->start_line, to_string(order[k]->kind), order[k]->start_line));
        if (order[k]->end_line > widest->end_line)
            widest = order[k];
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it)
        splice(lines.lines, **it);
    return join_lines(lines);
}

DiffStat diff_stat(const Patch& patch)
{
    DiffStat stat;
    for (const auto& edit : patch.edits) {
        switch (edit.kind) {
        case EditKind::Insert:
            stat.inserted += edit.new_lines.size();
            break;
        case EditKind::Delete:
            stat.deleted += edit.end_line - edit.start_line + 1;
            break;
        case EditKind::Replace:
            stat.replaced += std::max(edit.end_line - edit.start_line + 1, edit.new_lines.size());
            break;
        }
    }
    return stat;
}

std::string format_patch(const Patch& patch)
{
    std::string out;
    for (const auto& edit : patch.edits) {
        if (edit.kind == EditKind::Insert)
            out += fmt::format("INSERT {}\n", edit.start_line);
        else
            out += fmt::format("{} {} {}\n", to_string(edit.kind), edit.start_line, edit.end_line);
        for (const auto& line : edit.new_lines) {
            out += line;
            out += '\n';
        }
        out += kEditTerminator;
        out += '\n';
    }
    return out;
}

} // namespace kagent
