#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "led/error.hpp"

namespace led {

/// Flat key=value configuration ("#" comments), merged with command-line
/// overrides. Keys are namespaced (space.*, train.*, finetune.*, net.*,
/// noise.*, oom.*); unknown keys are rejected so typos fail loudly.
class RunConfig {
public:
    RunConfig() = default;

    static RunConfig load_file(const std::string& path);
    static bool known_key(const std::string& key);

    // Validates the key; value may be any string.
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    /// Sorted key=value lines of everything that was set; logged per run.
    std::string resolved_text() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace led
