#pragma once

// Ten-shot rationale generation for support records.
//
// Each exemplar contributes four turns:
//   user       "Determine whether the following post is hateful. Text: {text}:"
//              (memes: "... meme is hateful. Text: {text} Caption: {caption}")
//   assistant  "{label}"
//   user       "Briefly provide an explanation, in no more than three points, ..."
//   assistant  "Answer: {rationale}"
// and the target record closes with the first three turns, its ground-truth
// label standing in the assistant slot.

#include <xicl/corpus.hpp>
#include <xicl/gateway.hpp>
#include <xicl/parallel.hpp>
#include <xicl/prompt.hpp>

#include <mutex>

namespace xicl {

inline constexpr std::size_t kRationaleShots = 10;

/// "hateful" / "not hateful", the spelling used in rationale prompts.
inline std::string_view rationale_label(Label label) { return label == Label::hateful ? "hateful" : "not hateful"; }

inline std::string_view modality_noun(Modality m) { return m == Modality::meme ? "meme" : "post"; }

struct RationaleExemplar {
    Modality modality = Modality::text_post;
    std::string text;
    std::optional<std::string> caption;
    Label label = Label::not_hateful;
    std::string rationale_text;

    /// The "Text: ..." part of the question turn.
    std::string content_rendering() const {
        if (modality == Modality::meme) return "Text: " + text + " Caption: " + caption.value_or("");
        return "Text: " + text + ":";
    }
};

namespace detail {

inline std::string rationale_question(Modality m, const std::string& content_rendering) {
    return "Determine whether the following " + std::string(modality_noun(m)) + " is hateful. " + content_rendering;
}

inline std::string rationale_followup(Modality m, Label label) {
    return "Briefly provide an explanation, in no more than three points, for the " + std::string(modality_noun(m)) +
           " being perceived as " + std::string(rationale_label(label)) +
           ". Your explanation should address the targeted group, any derogatory imagery or language used, and the "
           "impact it has on perpetuating bias, stereotypes, prejudice, discrimination or inciting harm.";
}

inline bool ends_with_summary(std::string_view rationale, Modality m, Label label) {
    auto t = trim(rationale);
    while (!t.empty() && (t.back() == '.' || t.back() == ' ')) t.remove_suffix(1);
    const std::string expected =
        "in summary, this " + std::string(modality_noun(m)) + " is " + std::string(rationale_label(label));
    return ascii_lower(t).ends_with(expected);
}

}  // namespace detail

/// Exactly ten exemplars, five per label, one modality, each rationale closing
/// with "In summary, this post/meme is {label}".
inline void validate_exemplars(std::span<const RationaleExemplar> exemplars) {
    if (exemplars.size() != kRationaleShots) {
        throw DataError("rationale prompting needs exactly 10 exemplars, got " + std::to_string(exemplars.size()));
    }
    std::size_t hateful = 0;
    for (const auto& e : exemplars) {
        if (e.modality != exemplars.front().modality) throw DataError("exemplars mix posts and memes");
        if (e.modality == Modality::meme && (!e.caption || e.caption->empty())) {
            throw DataError("meme exemplar '" + e.text + "' has no caption");
        }
        if (!detail::ends_with_summary(e.rationale_text, e.modality, e.label)) {
            throw DataError("exemplar rationale must end with \"In summary, this " +
                            std::string(modality_noun(e.modality)) + " is " + std::string(rationale_label(e.label)) +
                            "\": '" + e.text + "'");
        }
        if (e.label == Label::hateful) ++hateful;
    }
    if (hateful != kRationaleShots / 2) {
        throw DataError("exemplars must be 5 hateful / 5 not hateful, got " + std::to_string(hateful) + " hateful");
    }
}

/// Exemplar fixture: JSON lines {"modality","text","caption","label","rationale"}.
inline std::vector<RationaleExemplar> load_exemplars(const fs::path& path) {
    std::vector<RationaleExemplar> out;
    for_each_json_line(path, [&](const json& j, std::size_t lineno) {
        const auto where = line_context(path, lineno);
        try {
            RationaleExemplar e;
            e.modality = parse_modality(j.at("modality").get<std::string>());
            e.text = j.at("text").get<std::string>();
            if (j.contains("caption") && !j.at("caption").is_null()) e.caption = j.at("caption").get<std::string>();
            e.label = parse_label(j.at("label").get<std::string>());
            e.rationale_text = j.at("rationale").get<std::string>();
            out.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw DataError(where + ": " + ex.what());
        } catch (const UsageError& ex) {
            throw DataError(where + ": " + ex.what());
        }
    });
    validate_exemplars(out);
    return out;
}

inline PromptBundle build_rationale_prompt(const Record& record, std::span<const RationaleExemplar> exemplars) {
    if (!record.label) throw DataError("record '" + record.id + "' has no label; rationales need the ground truth");
    validate_exemplars(exemplars);
    if (exemplars.front().modality != record.modality) {
        throw DataError("exemplars are " + std::string(to_string(exemplars.front().modality)) + " but record '" +
                        record.id + "' is " + std::string(to_string(record.modality)));
    }
    if (record.modality == Modality::meme && (!record.caption || record.caption->empty())) {
        throw DataError("meme '" + record.id + "' has no caption");
    }

    PromptBundle b;
    for (const auto& e : exemplars) {
        b.messages.push_back({Role::user, detail::rationale_question(e.modality, e.content_rendering())});
        b.messages.push_back({Role::assistant, std::string(rationale_label(e.label))});
        b.messages.push_back({Role::user, detail::rationale_followup(e.modality, e.label)});
        b.messages.push_back({Role::assistant, "Answer: " + e.rationale_text});
    }
    const RationaleExemplar target{record.modality, record.text, record.caption, *record.label, {}};
    b.messages.push_back({Role::user, detail::rationale_question(record.modality, target.content_rendering())});
    b.messages.push_back({Role::assistant, std::string(rationale_label(*record.label))});
    b.messages.push_back({Role::user, detail::rationale_followup(record.modality, *record.label)});
    b.meta.test_record_id = record.id;
    return b;
}

/// Drops surrounding whitespace and one leading "Answer:" primed by the template.
inline std::string clean_rationale(std::string_view raw) {
    auto t = trim(raw);
    if (t.starts_with("Answer:")) t = trim(t.substr(7));
    return std::string(t);
}

struct GenerationFailure {
    std::string id;
    std::string reason;
};

struct RationaleRun {
    std::vector<SidecarLine> lines;  // input order, failures omitted
    std::vector<GenerationFailure> failures;
};

inline DecodingParams rationale_decoding(std::string model_id) { return {std::move(model_id), 0.0, 512}; }

inline RationaleRun generate_rationales(std::span<const Record> records, Gateway& gateway,
                                        std::span<const RationaleExemplar> exemplars, const DecodingParams& params,
                                        std::size_t max_in_flight = 4) {
    validate_exemplars(exemplars);
    std::vector<std::optional<SidecarLine>> slots(records.size());
    std::vector<std::optional<std::string>> errors(records.size());
    parallel_for(records.size(), max_in_flight, [&](std::size_t i) {
        const auto& r = records[i];
        try {
            const auto bundle = build_rationale_prompt(r, exemplars);
            const auto completion = gateway.complete(bundle, params);
            auto value = clean_rationale(completion.text);
            if (value.empty()) {
                errors[i] = "empty rationale after stripping the Answer: prefix";
                return;
            }
            slots[i] = SidecarLine{r.id, std::move(value), params.model_id, prompt_hash(bundle.messages)};
        } catch (const GatewayError& e) {
            errors[i] = e.what();
        }
    });
    RationaleRun run;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i]) run.lines.push_back(std::move(*slots[i]));
        if (errors[i]) run.failures.push_back({records[i].id, *errors[i]});
    }
    return run;
}

}  // namespace xicl
