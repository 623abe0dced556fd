#include "tool_util.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

#include "mocap/io.hpp"
#include "mocap/version.hpp"

namespace mocap::tool {

void RunManifest::write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["configs"] = configs;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [name, secs] : stage_seconds) stages[name] = secs;
    j["wall_clock_seconds"] = std::move(stages);
    j["status"] = "ok";
    write_file_atomic(path, j.dump(2));
}

std::string RunManifest::default_path(const std::string& primary_output) {
    if (!primary_output.empty() && primary_output.back() == '/')
        return primary_output + "manifest.json";
    return primary_output + ".manifest.json";
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error;
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const int i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    error = e.what();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed) throw std::runtime_error(error);
}

int default_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

bool log_enabled(int level) {
    const char* env = std::getenv("MOCAP_LOG");
    if (env == nullptr) return level <= 1;
    const std::string v(env);
    if (v == "quiet" || v == "0") return false;
    if (v == "debug" || v == "2") return true;
    return level <= 1;
}

void log_info(const std::string& message) {
    if (log_enabled(1)) std::cerr << message << "\n";
}

}  // namespace mocap::tool
