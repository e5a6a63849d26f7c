#include "red/external_eds.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "red/errors.hpp"

namespace red {

using json = nlohmann::json;

ExternalEds::ExternalEds(ExternalEdsConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) {
        throw std::invalid_argument("external EDS command must not be empty");
    }
    if (config_.timeout_seconds <= 0.0) {
        throw std::invalid_argument("timeout must be positive");
    }
}

ExternalEds::~ExternalEds() { terminate_child(); }

void ExternalEds::ensure_running() {
    if (pid_ > 0) {
        // Reap without blocking; a dead child triggers a restart.
        int status = 0;
        const pid_t r = ::waitpid(static_cast<pid_t>(pid_), &status, WNOHANG);
        if (r == 0) {
            return;
        }
        terminate_child();
    }

    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
        throw ProtocolError("cannot create pipes for the child process");
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
        throw ProtocolError("cannot fork the child process");
    }
    if (pid == 0) {
        ::setpgid(0, 0); // own process group so teardown reaps grandchildren
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", config_.command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    ::close(to_child[0]);
    ::close(from_child[1]);
    pid_ = pid;
    to_child_ = to_child[1];
    from_child_ = from_child[0];
    read_buffer_.clear();
}

void ExternalEds::terminate_child() noexcept {
    if (to_child_ >= 0) {
        ::close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        ::close(from_child_);
        from_child_ = -1;
    }
    if (pid_ > 0) {
        const pid_t pid = static_cast<pid_t>(pid_);
        ::kill(-pid, SIGTERM); // the whole group: sh and whatever it spawned
        ::kill(pid, SIGTERM);
        int status = 0;
        for (int i = 0; i < 20; ++i) {
            if (::waitpid(pid, &status, WNOHANG) != 0) {
                ::kill(-pid, SIGKILL);
                pid_ = -1;
                return;
            }
            ::usleep(5000);
        }
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        pid_ = -1;
    }
}

std::string ExternalEds::request_reply(const std::string& line) {
    ensure_running();

    const auto deadline =
        std::chrono::steady_clock::now() +
        std::chrono::microseconds(static_cast<long long>(config_.timeout_seconds * 1e6));

    // Write the request. The child may exit mid-write; treat that as a
    // protocol failure rather than dying on SIGPIPE (callers are expected
    // to ignore it process-wide).
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            terminate_child();
            throw ProtocolError("child process closed its input");
        }
        written += static_cast<std::size_t>(n);
    }

    // Read one reply line.
    while (true) {
        const std::size_t newline = read_buffer_.find('\n');
        if (newline != std::string::npos) {
            std::string reply = read_buffer_.substr(0, newline);
            read_buffer_.erase(0, newline + 1);
            return reply;
        }

        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            terminate_child();
            throw TimeoutError("no reply within " + format_double(config_.timeout_seconds) +
                               " seconds");
        }
        struct pollfd pfd {};
        pfd.fd = from_child_;
        pfd.events = POLLIN;
        const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
        if (pr < 0 && errno != EINTR) {
            terminate_child();
            throw ProtocolError("poll on the child process failed");
        }
        if (pr <= 0) {
            continue;
        }
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            terminate_child();
            throw ProtocolError("cannot read from the child process");
        }
        if (n == 0) {
            terminate_child();
            throw ProtocolError("child process exited without replying");
        }
        read_buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

FitOutcome ExternalEds::fit(const Dataset& data, const FitTarget& target) {
    if (target.values.size() != data.rows()) {
        throw std::invalid_argument("target length must match the dataset");
    }

    json request;
    request["op"] = "fit";
    json columns = json::array();
    for (std::size_t c = 0; c < data.x_count(); ++c) {
        columns.push_back("x" + std::to_string(c));
    }
    request["columns"] = std::move(columns);

    json rows = json::array();
    json target_values = json::array();
    for (std::size_t r = 0; r < data.rows(); ++r) {
        if (!target.valid[r]) {
            continue;
        }
        json row = json::array();
        for (std::size_t c = 0; c < data.x_count(); ++c) {
            row.push_back(data.x(c)[r]);
        }
        rows.push_back(std::move(row));
        target_values.push_back(target.values[r]);
    }
    request["rows"] = std::move(rows);
    request["target"] = std::move(target_values);

    const std::string reply_line = request_reply(request.dump() + "\n");

    json reply = json::parse(reply_line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("ok") ||
        !reply["ok"].is_boolean()) {
        throw ProtocolError("malformed reply: " + reply_line.substr(0, 200));
    }
    if (!reply["ok"].get<bool>()) {
        const std::string msg =
            reply.contains("error") && reply["error"].is_string() ? reply["error"].get<std::string>()
                                                                  : "unspecified";
        throw FitFailed("external model reported: " + msg);
    }
    if (!reply.contains("equation") || !reply["equation"].is_string()) {
        throw ProtocolError("reply lacks an equation field");
    }

    const std::string equation = reply["equation"].get<std::string>();
    Expression expr = parse_expression(equation); // SyntaxError propagates
    if (expr.max_variable() >= static_cast<std::int32_t>(data.x_count())) {
        throw ProtocolError("equation uses variable x" + std::to_string(expr.max_variable()) +
                            " outside the dataset");
    }

    FitOutcome outcome;
    outcome.no_operator_prediction = count_operators(expr) == 0;
    const std::vector<double> pred = evaluate(expr, data);
    double sse = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (target.valid[r] && std::isfinite(pred[r])) {
            const double d = pred[r] - target.values[r];
            sse += d * d;
            ++n;
        }
    }
    outcome.train_mse = n > 0 ? sse / static_cast<double>(n) : std::numeric_limits<double>::infinity();
    outcome.expr = std::move(expr);
    return outcome;
}

Expression external_fit(const ExternalEdsConfig& config, const Dataset& data,
                        const FitTarget& target) {
    ExternalEds model(config);
    return model.fit(data, target).expr;
}

} // namespace red
