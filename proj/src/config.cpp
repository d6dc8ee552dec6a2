#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "led/config.hpp"

namespace led {
namespace {

constexpr std::array kKnownKeys = {
    // parameter space, one lo/hi pair per coordinate
    "space.k_min_lo", "space.k_min_hi",
    "space.k_max_lo", "space.k_max_hi",
    "space.lambda_lo", "space.lambda_hi",
    "space.mu_c_lo", "space.mu_c_hi",
    "space.a_tl_lo", "space.a_tl_hi",
    "space.b_tl_lo", "space.b_tl_hi",
    "space.sigma_hat_tl_lo", "space.sigma_hat_tl_hi",
    "space.a_r_lo", "space.a_r_hi",
    "space.b_r_lo", "space.b_r_hi",
    "space.sigma_hat_r_lo", "space.sigma_hat_r_hi",
    // network
    "net.base_width", "net.stages", "net.m",
    // pre-training
    "train.iterations", "train.batch_size", "train.patch_size", "train.lr_initial",
    "train.lr_schedule", "train.ratios", "train.seed",
    // fine-tuning
    "finetune.iterations_csa", "finetune.iterations_omnr", "finetune.lr_csa", "finetune.lr_omnr",
    "finetune.batch_size", "finetune.patch_size", "finetune.seed", "finetune.init",
    "finetune.select", "finetune.pairs_per_ratio",
    // sensor / noise
    "noise.black_level", "noise.white_level", "noise.components",
    // out-of-model fixture
    "oom.fixed_pattern_amplitude", "oom.banding_period", "oom.banding_amplitude", "oom.seed",
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

bool RunConfig::known_key(const std::string& key) {
    return std::find(kKnownKeys.begin(), kKnownKeys.end(), key) != kKnownKeys.end();
}

RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config " + path + " line " + std::to_string(lineno) +
                            ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const DataError& e) {
            throw DataError("config " + path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw DataError("unknown config key: " + key);
    values_[key] = value;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw DataError("");
        return v;
    } catch (const std::exception&) {
        throw DataError("config key " + key + ": not a number: " + it->second);
    }
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw DataError("config key " + key + ": not an integer");
    return i;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw DataError("config key " + key + ": not an unsigned integer: " + it->second);
    }
}

std::vector<double> RunConfig::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw DataError("config key " + key + ": not a number list: " + it->second);
        }
    }
    if (out.empty()) throw DataError("config key " + key + ": empty list");
    return out;
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    return out.str();
}

} // namespace led
