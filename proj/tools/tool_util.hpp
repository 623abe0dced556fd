#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace mocap::tool {

/// Record of one CLI invocation, written atomically next to the primary
/// output on completion.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::string> configs;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, double>> stage_seconds;

    void write(const std::string& path) const;
    /// Default manifest location for a primary output file or directory.
    static std::string default_path(const std::string& primary_output);
};

/// Wall-clock scope timer feeding a manifest stage entry.
class StageTimer {
public:
    StageTimer(RunManifest& manifest, std::string name)
        : manifest_(manifest), name_(std::move(name)), start_(clock::now()) {}
    ~StageTimer() {
        const double secs =
            std::chrono::duration<double>(clock::now() - start_).count();
        manifest_.stage_seconds.emplace_back(name_, secs);
    }

private:
    using clock = std::chrono::steady_clock;
    RunManifest& manifest_;
    std::string name_;
    clock::time_point start_;
};

/// Runs fn(i) for i in [0, count) on up to jobs threads. Results must be
/// written into pre-sized slots by index so output order stays canonical
/// regardless of scheduling.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

int default_jobs();

/// Log verbosity from the MOCAP_LOG environment variable (quiet|info|debug).
bool log_enabled(int level);  // 1 = info, 2 = debug
void log_info(const std::string& message);

}  // namespace mocap::tool
