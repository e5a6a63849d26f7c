#ifndef RED_EXTERNAL_EDS_HPP
#define RED_EXTERNAL_EDS_HPP

#include <string>

#include "red/eds.hpp"

namespace red {

struct ExternalEdsConfig {
    /// Shell command that starts the child process.
    std::string command;
    /// Per-request reply deadline.
    double timeout_seconds = 120.0;
};

/// Adapter for equation discovery systems running as a child process.
///
/// The child speaks line-delimited JSON on its standard streams, one
/// request per line:
///   {"op":"fit","columns":["x0",...],"rows":[[...],...],"target":[...]}
/// and replies with a single line:
///   {"ok":true,"equation":"<equation text>"}   or
///   {"ok":false,"error":"<message>"}
///
/// The process is started lazily, kept alive across fits, and restarted if
/// it dies. A reply that misses the deadline kills the child and raises
/// TimeoutError. Invalid replies raise ProtocolError; unparseable equations
/// raise SyntaxError; an explicit {"ok":false} reply raises FitFailed.
class ExternalEds : public EdsModel {
public:
    explicit ExternalEds(ExternalEdsConfig config);
    ~ExternalEds() override;

    ExternalEds(const ExternalEds&) = delete;
    ExternalEds& operator=(const ExternalEds&) = delete;

    FitOutcome fit(const Dataset& data, const FitTarget& target) override;
    void reseed(std::uint64_t) override {}
    std::string name() const override { return "external"; }

    const ExternalEdsConfig& config() const noexcept { return config_; }

private:
    void ensure_running();
    void terminate_child() noexcept;
    std::string request_reply(const std::string& line);

    ExternalEdsConfig config_;
    long pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string read_buffer_;
};

/// One-shot convenience wrapper: spawns the child, performs a single fit,
/// and tears the process down again.
Expression external_fit(const ExternalEdsConfig& config, const Dataset& data,
                        const FitTarget& target);

} // namespace red

#endif
