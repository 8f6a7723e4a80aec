#pragma once

#include <xicl/error.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>

namespace xicl {

enum class Modality { text_post, meme };
enum class Label { hateful, not_hateful };
enum class ParsedLabel { hateful, not_hateful, invalid };
enum class IndexKind { tfidf, bm25 };
enum class MatchingKey { content, rationale };
enum class Strategy { none, random, tfidf, bm25 };
enum class InvalidPolicy { count_as_wrong, exclude };
enum class Role { system, user, assistant };

namespace detail {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

inline constexpr NameTable<Modality, 2> kModalityNames{{
    {Modality::text_post, "text_post"}, {Modality::meme, "meme"}}};
inline constexpr NameTable<Label, 2> kLabelNames{{
    {Label::hateful, "hateful"}, {Label::not_hateful, "not_hateful"}}};
inline constexpr NameTable<ParsedLabel, 3> kParsedLabelNames{{
    {ParsedLabel::hateful, "hateful"},
    {ParsedLabel::not_hateful, "not_hateful"},
    {ParsedLabel::invalid, "invalid"}}};
inline constexpr NameTable<IndexKind, 2> kIndexKindNames{{
    {IndexKind::tfidf, "tfidf"}, {IndexKind::bm25, "bm25"}}};
inline constexpr NameTable<MatchingKey, 2> kMatchingKeyNames{{
    {MatchingKey::content, "content"}, {MatchingKey::rationale, "rationale"}}};
inline constexpr NameTable<Strategy, 4> kStrategyNames{{
    {Strategy::none, "none"},
    {Strategy::random, "random"},
    {Strategy::tfidf, "tfidf"},
    {Strategy::bm25, "bm25"}}};
inline constexpr NameTable<InvalidPolicy, 2> kInvalidPolicyNames{{
    {InvalidPolicy::count_as_wrong, "count_as_wrong"}, {InvalidPolicy::exclude, "exclude"}}};
inline constexpr NameTable<Role, 3> kRoleNames{{
    {Role::system, "system"}, {Role::user, "user"}, {Role::assistant, "assistant"}}};

template <class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <class E, std::size_t N>
E parse_name(const NameTable<E, N>& table, std::string_view text, std::string_view what) {
    for (const auto& [e, name] : table) {
        if (name == text) return e;
    }
    std::string allowed;
    for (const auto& [e, name] : table) {
        if (!allowed.empty()) allowed += ", ";
        allowed += name;
    }
    throw UsageError("invalid " + std::string(what) + " '" + std::string(text) +
                     "' (expected one of: " + allowed + ")");
}

}  // namespace detail

inline std::string_view to_string(Modality v) { return detail::name_of(detail::kModalityNames, v); }
inline std::string_view to_string(Label v) { return detail::name_of(detail::kLabelNames, v); }
inline std::string_view to_string(ParsedLabel v) { return detail::name_of(detail::kParsedLabelNames, v); }
inline std::string_view to_string(IndexKind v) { return detail::name_of(detail::kIndexKindNames, v); }
inline std::string_view to_string(MatchingKey v) { return detail::name_of(detail::kMatchingKeyNames, v); }
inline std::string_view to_string(Strategy v) { return detail::name_of(detail::kStrategyNames, v); }
inline std::string_view to_string(InvalidPolicy v) { return detail::name_of(detail::kInvalidPolicyNames, v); }
inline std::string_view to_string(Role v) { return detail::name_of(detail::kRoleNames, v); }

inline Modality parse_modality(std::string_view s) { return detail::parse_name(detail::kModalityNames, s, "modality"); }
inline Label parse_label(std::string_view s) { return detail::parse_name(detail::kLabelNames, s, "label"); }
inline ParsedLabel parse_parsed_label(std::string_view s) {
    return detail::parse_name(detail::kParsedLabelNames, s, "parsed label");
}
inline IndexKind parse_index_kind(std::string_view s) { return detail::parse_name(detail::kIndexKindNames, s, "index kind"); }
inline MatchingKey parse_matching_key(std::string_view s) {
    return detail::parse_name(detail::kMatchingKeyNames, s, "matching key");
}
inline Strategy parse_strategy(std::string_view s) { return detail::parse_name(detail::kStrategyNames, s, "strategy"); }
inline InvalidPolicy parse_invalid_policy(std::string_view s) {
    return detail::parse_name(detail::kInvalidPolicyNames, s, "invalid policy");
}
inline Role parse_role(std::string_view s) { return detail::parse_name(detail::kRoleNames, s, "role"); }

/// "Hateful" / "Not Hateful", the spelling used in rendered answers.
inline std::string_view answer_text(Label label) {
    return label == Label::hateful ? "Hateful" : "Not Hateful";
}

inline ParsedLabel to_parsed(Label label) {
    return label == Label::hateful ? ParsedLabel::hateful : ParsedLabel::not_hateful;
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

}  // namespace xicl
