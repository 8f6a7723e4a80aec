#pragma once

// Classification prompts: content rendering, "### EXAMPLE n" demonstration
// blocks, and the system + single-user-turn chat envelope.

#include <xicl/corpus.hpp>
#include <xicl/retrieval.hpp>
#include <xicl/types.hpp>

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace xicl {

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct PromptMeta {
    std::string test_record_id;
    std::vector<std::string> demo_ids;
    std::size_t shots = 0;
    Strategy strategy = Strategy::none;
    std::optional<MatchingKey> matching_key;

    bool operator==(const PromptMeta&) const = default;
};

struct PromptBundle {
    std::vector<Message> messages;
    PromptMeta meta;

    bool operator==(const PromptBundle&) const = default;
};

struct Demonstration {
    std::size_t ordinal = 0;  // 1-based
    std::string record_id;
    std::string content_rendering;
    Label answer = Label::not_hateful;
    std::string rationale;  // may be empty: the Rationale line is then omitted

    /// "### EXAMPLE n\nContent: ...\nAnswer: ...\nRationale: ...\n"
    std::string render() const {
        std::string out = "### EXAMPLE " + std::to_string(ordinal) + "\n";
        out += "Content: " + content_rendering + "\n";
        out += "Answer: " + std::string(answer_text(answer)) + "\n";
        if (!rationale.empty()) out += "Rationale: " + rationale + "\n";
        return out;
    }
};

// Templates -------------------------------------------------------------------

inline constexpr std::string_view kDefaultTemplates =
    R"(# Classification prompt templates.
# Sections start with a [[name]] line and run until the next section; trailing
# newlines of a section are dropped. Placeholders: {text}, {caption}.
version = 1

[[system]]
You are a content moderation assistant that decides whether online content is hateful. Posts are given as text; memes are described by their overlaid text and a caption of the image. Labelled examples may precede the content to classify. Answer with exactly 'Hateful' or 'Not Hateful' on the first line, then optionally a rationale.

[[post]]
A post containing '{text}'

[[meme]]
A meme containing the overlaid text '{text}' on an image showing '{caption}'
)";

struct PromptTemplates {
    std::string version;
    std::string system;
    std::string post;
    std::string meme;

    bool operator==(const PromptTemplates&) const = default;

    static PromptTemplates parse(std::string_view source, const std::string& where = "<templates>") {
        std::map<std::string, std::string> sections;
        std::string version;
        std::string* current = nullptr;
        std::size_t pos = 0;
        while (pos <= source.size()) {
            auto end = source.find('\n', pos);
            if (end == std::string_view::npos) end = source.size();
            std::string_view line = source.substr(pos, end - pos);
            pos = end + 1;
            if (line.size() > 4 && line.starts_with("[[") && line.ends_with("]]")) {
                const std::string name(line.substr(2, line.size() - 4));
                if (sections.count(name)) throw DataError(where + ": duplicate section [[" + name + "]]");
                current = &sections[name];
                continue;
            }
            if (current) {
                *current += line;
                *current += '\n';
                continue;
            }
            const auto t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            if (auto eq = t.find('='); eq != std::string_view::npos && trim(t.substr(0, eq)) == "version") {
                version = std::string(trim(t.substr(eq + 1)));
                continue;
            }
            throw DataError(where + ": unexpected line before first section: '" + std::string(t) + "'");
        }
        PromptTemplates out;
        out.version = version;
        auto take = [&](const char* name) {
            auto it = sections.find(name);
            if (it == sections.end()) throw DataError(where + ": missing section [[" + std::string(name) + "]]");
            std::string body = it->second;
            while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
            return body;
        };
        out.system = take("system");
        out.post = take("post");
        out.meme = take("meme");
        if (out.version.empty()) throw DataError(where + ": missing version");
        return out;
    }

    static PromptTemplates load(const fs::path& path) { return parse(read_file(path), path.string()); }

    static const PromptTemplates& defaults() {
        static const PromptTemplates t = parse(kDefaultTemplates, "<built-in templates>");
        return t;
    }
};

/// Single-pass substitution of {name} placeholders; unknown names are left as-is
/// and substituted values are never rescanned.
inline std::string fill_placeholders(std::string_view tpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            auto close = tpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(tpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tpl[i++];
    }
    return out;
}

inline std::string render_content(const Record& r, const PromptTemplates& tpl = PromptTemplates::defaults()) {
    if (r.modality == Modality::meme) {
        if (!r.caption || r.caption->empty()) throw DataError("meme '" + r.id + "' has no caption");
        return fill_placeholders(tpl.meme, {{"text", r.text}, {"caption", *r.caption}});
    }
    return fill_placeholders(tpl.post, {{"text", r.text}});
}

/// Blocks separated by one blank line, followed by a blank line; empty for k = 0.
inline std::string render_demonstration_section(std::span<const Demonstration> demos) {
    std::string out;
    for (const auto& d : demos) {
        out += d.render();
        out += '\n';
    }
    return out;
}

inline std::string render_query_block(const Record& test, const PromptTemplates& tpl) {
    return "Content: " + render_content(test, tpl) + "\nAnswer:";
}

/// System message, then one user message: demonstration section + query block.
inline PromptBundle build_classification_prompt(const Record& test, std::span<const Demonstration> demos,
                                                const PromptTemplates& tpl = PromptTemplates::defaults()) {
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (demos[i].ordinal != i + 1) {
            throw DataError("demonstration ordinals must run 1.." + std::to_string(demos.size()) + " in order; got " +
                            std::to_string(demos[i].ordinal) + " at position " + std::to_string(i + 1));
        }
    }
    PromptBundle bundle;
    bundle.messages.push_back({Role::system, tpl.system});
    bundle.messages.push_back({Role::user, render_demonstration_section(demos) + render_query_block(test, tpl)});
    bundle.meta.test_record_id = test.id;
    bundle.meta.shots = demos.size();
    for (const auto& d : demos) bundle.meta.demo_ids.push_back(d.record_id);
    return bundle;
}

inline Demonstration make_demonstration(const Record& r, std::size_t ordinal,
                                        const PromptTemplates& tpl = PromptTemplates::defaults()) {
    if (!r.label) throw DataError("support record '" + r.id + "' has no label");
    return {ordinal, r.id, render_content(r, tpl), *r.label, r.rationale.value_or("")};
}

/// Ranked strategies put the most similar demonstration last (next to the
/// query); random hits keep their sampling order. Ordinals are renumbered 1..k.
inline std::vector<Demonstration> order_demonstrations(std::span<const RankedHit> hits, Strategy strategy,
                                                       std::span<const Record> support,
                                                       const PromptTemplates& tpl = PromptTemplates::defaults()) {
    std::unordered_map<std::string_view, const Record*> by_id;
    for (const auto& r : support) by_id.emplace(r.id, &r);

    std::vector<const RankedHit*> ordered;
    for (const auto& h : hits) ordered.push_back(&h);
    if (strategy != Strategy::random) std::reverse(ordered.begin(), ordered.end());

    std::vector<Demonstration> demos;
    demos.reserve(ordered.size());
    for (const auto* h : ordered) {
        auto it = by_id.find(h->record_id);
        if (it == by_id.end()) throw DataError("demonstration id '" + h->record_id + "' not in support set");
        demos.push_back(make_demonstration(*it->second, demos.size() + 1, tpl));
    }
    return demos;
}

// Serialisation ---------------------------------------------------------------

inline json messages_json(std::span<const Message> messages) {
    json arr = json::array();
    for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return arr;
}

/// Human-readable dump of a bundle, used for case-study transcripts.
inline std::string transcript(const PromptBundle& b) {
    std::string out = "# test_record_id: " + b.meta.test_record_id + "\n";
    out += "# shots: " + std::to_string(b.meta.shots) + "\n";
    out += "# strategy: " + std::string(to_string(b.meta.strategy)) + "\n";
    out += "# matching_key: " + (b.meta.matching_key ? std::string(to_string(*b.meta.matching_key)) : "none") + "\n";
    out += "# demo_ids:";
    for (const auto& id : b.meta.demo_ids) out += " " + id;
    out += "\n";
    for (const auto& m : b.messages) {
        out += "\n=== " + std::string(to_string(m.role)) + " ===\n";
        out += m.content + "\n";
    }
    return out;
}

}  // namespace xicl
