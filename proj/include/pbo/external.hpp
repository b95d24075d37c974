#ifndef PBO_EXTERNAL_HPP
#define PBO_EXTERNAL_HPP

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include <pbo/functions.hpp>

namespace pbo {

    struct ProtocolConfig {
        std::chrono::milliseconds timeout{30000};
        /// When set, every request/response line is appended here.
        std::shared_ptr<std::vector<std::string>> transcript;
    };

    /// Child process speaking newline-delimited JSON on stdin/stdout.
    class ExternalProcess {
    public:
        ExternalProcess(const std::string& command, ProtocolConfig cfg) : _cfg(std::move(cfg))
        {
            int sv[2];
            if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
                throw ProtocolError(std::string("socketpair failed: ") + std::strerror(errno));
            _pid = ::fork();
            if (_pid < 0) {
                ::close(sv[0]);
                ::close(sv[1]);
                throw ProtocolError(std::string("fork failed: ") + std::strerror(errno));
            }
            if (_pid == 0) {
                ::setpgid(0, 0); // own group so teardown reaches grandchildren too
                ::dup2(sv[1], STDIN_FILENO);
                ::dup2(sv[1], STDOUT_FILENO);
                ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
                ::_exit(127);
            }
            ::close(sv[1]);
            _fd = sv[0];
        }

        ExternalProcess(const ExternalProcess&) = delete;
        ExternalProcess& operator=(const ExternalProcess&) = delete;

        ~ExternalProcess()
        {
            if (_fd >= 0) {
                ::shutdown(_fd, SHUT_RDWR);
                ::close(_fd);
            }
            if (_pid > 0) {
                int status = 0;
                for (int i = 0; i < 50; ++i) {
                    if (::waitpid(_pid, &status, WNOHANG) == _pid)
                        return;
                    ::usleep(2000);
                }
                ::kill(-_pid, SIGKILL);
                ::waitpid(_pid, &status, 0);
            }
        }

        /// One request/response round trip.
        nlohmann::json request(const nlohmann::json& msg)
        {
            const std::string line = msg.dump() + "\n";
            record(line.substr(0, line.size() - 1));
            std::size_t sent = 0;
            while (sent < line.size()) {
                const ssize_t n = ::send(_fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
                if (n < 0) {
                    if (errno == EINTR)
                        continue;
                    throw ProtocolError("external objective: write failed (process exited?)");
                }
                sent += static_cast<std::size_t>(n);
            }
            const std::string reply = read_line();
            record(reply);
            nlohmann::json out;
            try {
                out = nlohmann::json::parse(reply);
            }
            catch (const nlohmann::json::exception&) {
                throw ProtocolError("external objective: malformed response: " + reply);
            }
            if (!out.is_object())
                throw ProtocolError("external objective: malformed response: " + reply);
            if (out.contains("error"))
                throw ProtocolError("external objective reported error: " + out["error"].dump());
            return out;
        }

    private:
        void record(const std::string& s)
        {
            if (_cfg.transcript)
                _cfg.transcript->push_back(s);
        }

        std::string read_line()
        {
            using clock = std::chrono::steady_clock;
            const auto deadline = clock::now() + _cfg.timeout;
            for (;;) {
                const auto nl = _buffer.find('\n');
                if (nl != std::string::npos) {
                    std::string line = _buffer.substr(0, nl);
                    _buffer.erase(0, nl + 1);
                    return line;
                }
                const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
                if (left.count() <= 0)
                    throw ProtocolError("external objective: timeout waiting for response");
                pollfd p{_fd, POLLIN, 0};
                const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
                if (rc < 0) {
                    if (errno == EINTR)
                        continue;
                    throw ProtocolError("external objective: poll failed");
                }
                if (rc == 0)
                    throw ProtocolError("external objective: timeout waiting for response");
                char buf[4096];
                const ssize_t n = ::recv(_fd, buf, sizeof buf, 0);
                if (n < 0 && errno == EINTR)
                    continue;
                if (n <= 0)
                    throw ProtocolError("external objective: process exited"
                                        + (_buffer.empty() ? std::string() : " (partial line: " + _buffer + ")"));
                _buffer.append(buf, static_cast<std::size_t>(n));
            }
        }

        ProtocolConfig _cfg;
        pid_t _pid = -1;
        int _fd = -1;
        std::string _buffer;
    };

    /// Spawn `command`, handshake, and wrap it as a BoxObjective.
    inline BoxObjective external_objective(const std::string& command, ProtocolConfig cfg = {})
    {
        auto proc = std::make_shared<ExternalProcess>(command, std::move(cfg));
        const nlohmann::json hello = proc->request({{"op", "hello"}});
        if (!hello.contains("dim") || !hello["dim"].is_number_integer() || !hello.contains("threshold")
            || !hello["threshold"].is_number())
            throw ProtocolError("external objective: malformed handshake: " + hello.dump());
        const auto dim = hello["dim"].get<Eigen::Index>();
        const double threshold = hello["threshold"].get<double>();
        if (dim < 1)
            throw ProtocolError("external objective: handshake dimension must be positive");
        auto fn = [proc](const Vector& x) {
            nlohmann::json req;
            req["op"] = "eval";
            req["x"] = std::vector<double>(x.data(), x.data() + x.size());
            const nlohmann::json resp = proc->request(req);
            if (!resp.contains("y") || !resp["y"].is_number())
                throw ProtocolError("external objective: malformed response: " + resp.dump());
            return resp["y"].get<double>();
        };
        return BoxObjective(dim, std::move(fn), threshold, Descriptor{"external", 0, command});
    }

} // namespace pbo

#endif
