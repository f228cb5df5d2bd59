#include "kagent/executors.hpp"

#include "kagent/text.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <filesystem>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace kagent {

using nlohmann::json;
namespace fs = std::filesystem;

MockExecutor::MockExecutor(std::vector<json> replies, std::optional<std::string> profile_csv, bool repeat_last)
    : replies_(std::move(replies)), profile_csv_(std::move(profile_csv)), repeat_last_(repeat_last)
{
}

MockExecutor MockExecutor::from_file(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    if (!j.contains("replies") || !j["replies"].is_array())
        throw ConfigError(path + ": mock executor fixture needs a 'replies' array");
    std::optional<std::string> csv;
    if (j.contains("profile_csv")) {
        fs::path p = j["profile_csv"].get<std::string>();
        if (p.is_relative())
            p = fs::path(path).parent_path() / p;
        csv = p.string();
    }
    return MockExecutor(j["replies"].get<std::vector<json>>(), csv, j.value("repeat_last", false));
}

json MockExecutor::run(const json& job, std::chrono::milliseconds)
{
    jobs_.push_back(job);
    if (next_ >= replies_.size()) {
        if (!repeat_last_ || replies_.empty())
            throw ExecutorUnavailable(fmt::format("mock executor has no reply for job {} ({} scripted)",
                                                  job.value("job_id", std::string{"?"}), replies_.size()));
        next_ = replies_.size() - 1;
    }
    json reply = replies_[next_++];
    reply["job_id"] = job.at("job_id");
    if (job.value("profile", false) && profile_csv_)
        reply["profile_csv_path"] = *profile_csv_;
    return reply;
}

namespace {

void set_nonblocking(int fd)
{
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
}

} // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const std::string& input,
                          std::chrono::milliseconds timeout)
{
    if (argv.empty())
        throw ExecutorUnavailable("empty executor command");
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe(in_pipe) || ::pipe(out_pipe) || ::pipe(err_pipe))
        throw ExecutorUnavailable(std::string("pipe: ") + std::strerror(errno));

    pid_t pid = ::fork();
    if (pid < 0)
        throw ExecutorUnavailable(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::dup2(in_pipe[0], 0);
        ::dup2(out_pipe[1], 1);
        ::dup2(err_pipe[1], 2);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]})
            ::close(fd);
        std::vector<char*> args;
        for (const auto& a : argv)
            args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    set_nonblocking(in_pipe[1]);
    set_nonblocking(out_pipe[0]);
    set_nonblocking(err_pipe[0]);

    // A child that exits without reading stdin must not kill us.
    struct sigaction ignore {};
    ignore.sa_handler = SIG_IGN;
    struct sigaction previous {};
    ::sigaction(SIGPIPE, &ignore, &previous);

    ProcessResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t written = 0;
    int in_fd = in_pipe[1];
    if (input.empty()) {
        ::close(in_fd);
        in_fd = -1;
    }
    int out_fd = out_pipe[0], err_fd = err_pipe[0];
    char buf[65536];
    while (out_fd >= 0 || err_fd >= 0) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            result.timed_out = true;
            ::kill(pid, SIGKILL);
            break;
        }
        pollfd fds[3];
        int n = 0;
        if (in_fd >= 0)
            fds[n++] = {in_fd, POLLOUT, 0};
        if (out_fd >= 0)
            fds[n++] = {out_fd, POLLIN, 0};
        if (err_fd >= 0)
            fds[n++] = {err_fd, POLLIN, 0};
        int rc = ::poll(fds, static_cast<nfds_t>(n), static_cast<int>(std::min<long long>(left.count(), 1000)));
        if (rc < 0 && errno != EINTR)
            break;
        for (int i = 0; i < n; ++i) {
            if (!fds[i].revents)
                continue;
            int fd = fds[i].fd;
            if (fd == in_fd) {
                auto w = ::write(in_fd, input.data() + written, input.size() - written);
                if (w > 0)
                    written += static_cast<std::size_t>(w);
                if (w < 0 && errno != EAGAIN) {
                    ::close(in_fd);
                    in_fd = -1;
                } else if (written == input.size()) {
                    ::close(in_fd);
                    in_fd = -1;
                }
                continue;
            }
            auto r = ::read(fd, buf, sizeof buf);
            if (r > 0) {
                (fd == out_fd ? result.out : result.err).append(buf, static_cast<std::size_t>(r));
            } else if (r == 0 || errno != EAGAIN) {
                ::close(fd);
                (fd == out_fd ? out_fd : err_fd) = -1;
            }
        }
    }
    for (int fd : {in_fd, out_fd, err_fd})
        if (fd >= 0)
            ::close(fd);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::sigaction(SIGPIPE, &previous, nullptr);
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    return result;
}

SubprocessExecutor::SubprocessExecutor(std::vector<std::string> argv) : argv_(std::move(argv))
{
    if (argv_.empty())
        throw ConfigError("subprocess executor needs a command");
}

json SubprocessExecutor::run(const json& job, std::chrono::milliseconds timeout)
{
    auto result = run_process(argv_, job.dump(), timeout);
    if (result.timed_out)
        throw ExecutorTimeout(fmt::format("{} exceeded its deadline", argv_[0]));
    if (result.exit_code == 127 && result.out.empty())
        throw ExecutorUnavailable(fmt::format("cannot execute {}", argv_[0]));
    if (result.exit_code != 0)
        throw ProtocolViolation(fmt::format("{} exited with status {}: {}", argv_[0], result.exit_code, result.err));
    try {
        return json::parse(result.out);
    } catch (const json::parse_error& e) {
        throw ProtocolViolation(fmt::format("{} wrote malformed JSON: {}", argv_[0], e.what()));
    }
}

} // namespace kagent
