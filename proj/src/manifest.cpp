#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "led/raw.hpp"

namespace led::raw {
namespace {

using nlohmann::json;

std::string resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return path.string();
    return (base / path).lexically_normal().string();
}

} // namespace

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": " +
                            e.what());
        }
        ManifestEntry e;
        try {
            e.clean_path = resolve(base, j.at("clean_path").get<std::string>());
            if (j.contains("noisy_path") && !j["noisy_path"].is_null())
                e.noisy_path = resolve(base, j["noisy_path"].get<std::string>());
            e.ratio = j.value("ratio", 1.0);
            e.camera_id = j.value("camera_id", std::string());
            if (j.contains("K") && !j["K"].is_null()) e.k = j["K"].get<double>();
            if (j.contains("sigma_tl") && !j["sigma_tl"].is_null())
                e.sigma_tl = j["sigma_tl"].get<double>();
            e.scene_id = j.value("scene_id", std::string());
        } catch (const json::exception& ex) {
            throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": " +
                            ex.what());
        }
        if (!(e.ratio >= 1.0))
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": ratio must be >= 1");
        if (!std::filesystem::exists(e.clean_path))
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": missing file " + e.clean_path);
        if (e.noisy_path && !std::filesystem::exists(*e.noisy_path))
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": missing file " + *e.noisy_path);
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ostringstream out;
    for (const auto& e : entries) {
        json j;
        j["clean_path"] = e.clean_path;
        if (e.noisy_path) j["noisy_path"] = *e.noisy_path;
        j["ratio"] = e.ratio;
        j["camera_id"] = e.camera_id;
        if (e.k) j["K"] = *e.k;
        if (e.sigma_tl) j["sigma_tl"] = *e.sigma_tl;
        j["scene_id"] = e.scene_id;
        out << j.dump() << "\n";
    }
    write_text_atomic(path, out.str());
}

} // namespace led::raw
