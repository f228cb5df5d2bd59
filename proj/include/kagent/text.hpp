#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kagent {

// Source text as a list of lines. `trailing_newline` records whether the
// original text ended in '\n' so join() can restore it byte-exactly.
struct Lines {
    std::vector<std::string> lines;
    bool trailing_newline = false;
};

Lines split_lines(std::string_view text);
std::string join_lines(const Lines& lines);

// "   1| first line\n   2| second line\n"; width grows with line count.
std::string number_lines(std::string_view text);

// Replaces every occurrence of `placeholder`. Returns the number replaced.
std::size_t replace_all(std::string& text, std::string_view placeholder, std::string_view value);

std::size_t count_occurrences(std::string_view text, std::string_view needle);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);
// Writes via a temp file in the same directory and renames over `path`.
void write_file_atomic(const std::string& path, std::string_view content);

} // namespace kagent
