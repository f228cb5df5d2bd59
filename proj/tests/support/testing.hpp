#pragma once

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace kagent::testing {

inline std::string fixture(const std::string& rel)
{
    return std::string(KAGENT_FIXTURE_DIR) + "/" + rel;
}

inline std::string asset_dir()
{
    return std::string(KAGENT_SOURCE_DIR) + "/assets/prompts";
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        auto tmpl = (std::filesystem::temp_directory_path() / "kagent-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data()))
            throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    TempDir(const TempDir&) = delete;
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    const std::string& path() const { return path_; }
    std::string operator/(const std::string& rel) const { return path_ + "/" + rel; }

private:
    std::string path_;
};

} // namespace kagent::testing
