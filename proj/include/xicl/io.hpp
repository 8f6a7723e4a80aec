#pragma once

#include <xicl/error.hpp>

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

namespace xicl {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write-temp-then-rename so that readers never observe a partially written file.
inline void write_file_atomic(const fs::path& path, std::string_view contents) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

/// Calls `fn(json, line_number)` for every non-blank line of a JSON-lines file.
/// Parse failures are reported with the 1-based line number.
template <class Fn>
void for_each_json_line(const fs::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json value;
        try {
            value = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        fn(value, lineno);
    }
}

inline std::string line_context(const fs::path& path, std::size_t lineno) {
    return path.string() + ":" + std::to_string(lineno);
}

}  // namespace xicl
