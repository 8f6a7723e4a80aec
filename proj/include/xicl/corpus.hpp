#pragma once

// Datasets of labelled posts and memes, their caption/rationale sidecars, and
// the per-dataset manifest that declares how a source file is to be read.

#include <xicl/io.hpp>
#include <xicl/types.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace xicl {

struct Record {
    std::string id;
    Modality modality = Modality::text_post;
    std::string text;
    std::optional<std::string> caption;
    std::optional<Label> label;
    std::optional<std::string> rationale;
    std::string dataset;
    std::string split;

    bool operator==(const Record&) const = default;
};

struct DatasetStats {
    std::size_t n_records = 0;
    std::size_t n_hateful = 0;
    std::size_t n_not_hateful = 0;
    std::size_t n_missing_caption = 0;  // memes only
    std::size_t n_missing_rationale = 0;

    bool operator==(const DatasetStats&) const = default;
};

/// Maps lowercased raw label spellings (e.g. "1", "0", "hate") onto labels.
using LabelMap = std::map<std::string, Label>;

struct LoadOptions {
    LabelMap label_map;
    std::string dataset;  // defaults to the file stem
    std::string split;
};

enum class SidecarField { caption, rationale };

inline std::string_view to_string(SidecarField f) { return f == SidecarField::caption ? "caption" : "rationale"; }

inline SidecarField parse_sidecar_field(std::string_view s) {
    if (s == "caption") return SidecarField::caption;
    if (s == "rationale") return SidecarField::rationale;
    throw UsageError("invalid sidecar field '" + std::string(s) + "' (expected caption or rationale)");
}

struct SidecarLine {
    std::string id;
    std::string value;
    std::string producer;
    std::optional<std::string> prompt_hash;

    bool operator==(const SidecarLine&) const = default;
};

namespace detail {

inline Label normalize_label(const json& raw, const LabelMap& map, const std::string& where) {
    std::string key;
    if (raw.is_string()) {
        key = ascii_lower(trim(raw.get<std::string>()));
    } else if (raw.is_number_integer()) {
        key = std::to_string(raw.get<std::int64_t>());
    } else if (raw.is_boolean()) {
        key = raw.get<bool>() ? "true" : "false";
    } else {
        throw DataError(where + ": label must be a string, integer or null");
    }
    if (auto it = map.find(key); it != map.end()) return it->second;
    if (key == "hateful") return Label::hateful;
    if (key == "not_hateful") return Label::not_hateful;
    throw DataError(where + ": unknown label '" + key + "'");
}

inline std::optional<std::string> optional_string(const json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DataError(where + ": field '" + field + "' must be a string or null");
    return it->get<std::string>();
}

inline std::string required_string(const json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw DataError(where + ": missing string field '" + field + "'");
    }
    return it->get<std::string>();
}

}  // namespace detail

/// Parses one dataset line. Labels go through `options.label_map` first, then the
/// canonical spellings "hateful" / "not_hateful" (case-insensitive).
inline Record parse_record(const json& line, Modality modality, const LoadOptions& options,
                           const std::string& where) {
    if (!line.is_object()) throw DataError(where + ": expected a JSON object");
    Record r;
    r.id = detail::required_string(line, "id", where);
    if (r.id.empty()) throw DataError(where + ": empty id");
    r.modality = modality;
    r.text = detail::required_string(line, "text", where);
    r.caption = detail::optional_string(line, "caption", where);
    if (r.caption && r.caption->empty()) r.caption.reset();
    r.rationale = detail::optional_string(line, "rationale", where);
    if (r.rationale && r.rationale->empty()) r.rationale.reset();
    if (auto it = line.find("label"); it != line.end() && !it->is_null()) {
        r.label = detail::normalize_label(*it, options.label_map, where);
    }
    r.dataset = options.dataset;
    r.split = options.split;
    return r;
}

/// Loads a JSON-lines dataset in file order. Rejects malformed lines (with line
/// number), unknown labels and duplicate ids.
inline std::vector<Record> load_dataset(const fs::path& path, Modality expected_modality,
                                        LoadOptions options = {}) {
    if (options.dataset.empty()) options.dataset = path.stem().string();
    LabelMap lowered;
    for (const auto& [k, v] : options.label_map) lowered.emplace(ascii_lower(trim(k)), v);
    options.label_map = std::move(lowered);

    std::vector<Record> records;
    std::unordered_map<std::string, std::size_t> seen;
    for_each_json_line(path, [&](const json& line, std::size_t lineno) {
        const auto where = line_context(path, lineno);
        Record r = parse_record(line, expected_modality, options, where);
        if (auto [it, inserted] = seen.emplace(r.id, lineno); !inserted) {
            throw DataError(where + ": duplicate id '" + r.id + "' (first seen on line " +
                            std::to_string(it->second) + ")");
        }
        records.push_back(std::move(r));
    });
    return records;
}

inline ordered_json record_to_json(const Record& r) {
    ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["caption"] = r.caption ? ordered_json(*r.caption) : ordered_json(nullptr);
    j["label"] = r.label ? ordered_json(std::string(to_string(*r.label))) : ordered_json(nullptr);
    if (r.rationale) j["rationale"] = *r.rationale;
    return j;
}

inline void write_dataset(std::ostream& out, std::span<const Record> records) {
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline void write_dataset(const fs::path& path, std::span<const Record> records) {
    std::ostringstream ss;
    write_dataset(ss, records);
    write_file_atomic(path, ss.str());
}

inline std::vector<SidecarLine> read_sidecar(const fs::path& path) {
    std::vector<SidecarLine> lines;
    for_each_json_line(path, [&](const json& line, std::size_t lineno) {
        const auto where = line_context(path, lineno);
        if (!line.is_object()) throw DataError(where + ": expected a JSON object");
        SidecarLine s;
        s.id = detail::required_string(line, "id", where);
        s.value = detail::required_string(line, "value", where);
        if (s.value.empty()) throw DataError(where + ": empty value for id '" + s.id + "'");
        s.producer = detail::optional_string(line, "producer", where).value_or("");
        s.prompt_hash = detail::optional_string(line, "prompt_hash", where);
        lines.push_back(std::move(s));
    });
    return lines;
}

inline std::string sidecar_line_json(const SidecarLine& s) {
    ordered_json j;
    j["id"] = s.id;
    j["value"] = s.value;
    j["producer"] = s.producer;
    if (s.prompt_hash) j["prompt_hash"] = *s.prompt_hash;
    return j.dump();
}

inline void write_sidecar(const fs::path& path, std::span<const SidecarLine> lines) {
    std::string out;
    for (const auto& s : lines) out += sidecar_line_json(s) + '\n';
    write_file_atomic(path, out);
}

/// Joins sidecar values onto records by id. Every sidecar id must name a record,
/// values must be non-empty, and one id may not carry two different values.
inline std::vector<Record> merge_sidecar(std::vector<Record> records, std::span<const SidecarLine> sidecar,
                                         SidecarField field) {
    std::unordered_map<std::string, std::size_t> by_id;
    by_id.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) by_id.emplace(records[i].id, i);

    std::unordered_map<std::string, const std::string*> assigned;
    for (const auto& line : sidecar) {
        auto it = by_id.find(line.id);
        if (it == by_id.end()) {
            throw DataError(std::string(to_string(field)) + " sidecar id '" + line.id + "' matches no record");
        }
        if (line.value.empty()) throw DataError("empty sidecar value for id '" + line.id + "'");
        if (auto [prev, inserted] = assigned.emplace(line.id, &line.value); !inserted && *prev->second != line.value) {
            throw DataError("conflicting sidecar values for id '" + line.id + "'");
        }
        Record& r = records[it->second];
        (field == SidecarField::caption ? r.caption : r.rationale) = line.value;
    }
    return records;
}

inline std::vector<Record> merge_sidecar(std::vector<Record> records, const fs::path& sidecar_path,
                                         SidecarField field) {
    const auto lines = read_sidecar(sidecar_path);
    try {
        return merge_sidecar(std::move(records), lines, field);
    } catch (const DataError& e) {
        throw DataError(sidecar_path.string() + ": " + e.what());
    }
}

inline DatasetStats stats(std::span<const Record> records) {
    DatasetStats s;
    s.n_records = records.size();
    for (const auto& r : records) {
        if (r.label == Label::hateful) ++s.n_hateful;
        if (r.label == Label::not_hateful) ++s.n_not_hateful;
        if (r.modality == Modality::meme && !r.caption) ++s.n_missing_caption;
        if (!r.rationale) ++s.n_missing_rationale;
    }
    return s;
}

// Manifest ------------------------------------------------------------------

/// Declares one dataset file: name, split, modality, raw-label mapping and
/// optional caption / rationale sidecars. Relative paths resolve against the
/// manifest's directory.
struct DatasetManifest {
    std::string name;
    std::string split;
    Modality modality = Modality::text_post;
    LabelMap label_map;
    fs::path data;
    std::optional<fs::path> captions;
    std::optional<fs::path> rationales;
};

inline DatasetManifest load_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": malformed manifest: " + e.what());
    }
    const auto where = path.string();
    if (!j.is_object()) throw DataError(where + ": manifest must be a JSON object");
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    DatasetManifest m;
    m.name = detail::required_string(j, "name", where);
    m.split = detail::optional_string(j, "split", where).value_or("");
    try {
        m.modality = parse_modality(detail::required_string(j, "modality", where));
    } catch (const UsageError& e) {
        throw DataError(where + ": " + e.what());
    }
    m.data = resolve(detail::required_string(j, "data", where));
    if (auto c = detail::optional_string(j, "captions", where)) m.captions = resolve(*c);
    if (auto r = detail::optional_string(j, "rationales", where)) m.rationales = resolve(*r);
    if (auto it = j.find("label_map"); it != j.end()) {
        if (!it->is_object()) throw DataError(where + ": label_map must be an object");
        for (const auto& [raw, target] : it->items()) {
            if (!target.is_string()) throw DataError(where + ": label_map values must be strings");
            try {
                m.label_map.emplace(ascii_lower(raw), parse_label(ascii_lower(target.get<std::string>())));
            } catch (const UsageError& e) {
                throw DataError(where + ": " + e.what());
            }
        }
    }
    return m;
}

/// Loads the manifest's data file and merges its declared sidecars.
inline std::vector<Record> load_from_manifest(const DatasetManifest& m) {
    auto records = load_dataset(m.data, m.modality, LoadOptions{m.label_map, m.name, m.split});
    if (m.captions) records = merge_sidecar(std::move(records), *m.captions, SidecarField::caption);
    if (m.rationales) records = merge_sidecar(std::move(records), *m.rationales, SidecarField::rationale);
    return records;
}

}  // namespace xicl
