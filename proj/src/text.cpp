#include "kagent/text.hpp"

#include "kagent/error.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

namespace kagent {

Lines split_lines(std::string_view text)
{
    Lines out;
    if (text.empty())
        return out;
    if (text.back() == '\n') {
        out.trailing_newline = true;
        text.remove_suffix(1);
    }
    std::size_t start = 0;
    while (true) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.lines.emplace_back(text.substr(start));
            break;
        }
        out.lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

std::string join_lines(const Lines& lines)
{
    std::string out;
    for (std::size_t i = 0; i < lines.lines.size(); ++i) {
        if (i)
            out += '\n';
        out += lines.lines[i];
    }
    if (lines.trailing_newline && !lines.lines.empty())
        out += '\n';
    return out;
}

std::string number_lines(std::string_view text)
{
    auto lines = split_lines(text);
    auto width = std::to_string(lines.lines.size()).size();
    if (width < 4)
        width = 4;
    std::string out;
    for (std::size_t i = 0; i < lines.lines.size(); ++i) {
        auto n = std::to_string(i + 1);
        out.append(width - n.size(), ' ');
        out += n;
        out += "| ";
        out += lines.lines[i];
        out += '\n';
    }
    return out;
}

std::size_t replace_all(std::string& text, std::string_view placeholder, std::string_view value)
{
    if (placeholder.empty())
        return 0;
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
        ++count;
    }
    return count;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle)
{
    if (needle.empty())
        return 0;
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size()))
        ++count;
    return count;
}

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content)
{
    auto tmp = path + ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0)
        throw IoError("cannot create " + tmp);
    const char* p = content.data();
    std::size_t left = content.size();
    while (left > 0) {
        auto n = ::write(fd, p, left);
        if (n < 0) {
            ::close(fd);
            throw IoError("write failed: " + tmp);
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0)
        throw IoError("flush failed: " + tmp);
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("rename failed: " + tmp + " -> " + path);
}

} // namespace kagent
