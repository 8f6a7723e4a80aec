#include <xicl/prompt.hpp>

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace xicl;
using testing_support::meme;
using testing_support::post;

namespace {

std::size_t count_markers(const std::string& s) {
    std::size_t n = 0;
    for (auto pos = s.find("### EXAMPLE "); pos != std::string::npos; pos = s.find("### EXAMPLE ", pos + 1)) ++n;
    return n;
}

std::vector<Demonstration> demos_from(const std::vector<Record>& support) {
    std::vector<Demonstration> demos;
    for (const auto& r : support) demos.push_back(make_demonstration(r, demos.size() + 1));
    return demos;
}

}  // namespace

TEST(RenderContent, Posts) {
    EXPECT_EQ(render_content(post("p", "vile weed!", Label::not_hateful)), "A post containing 'vile weed!'");
}

TEST(RenderContent, Memes) {
    EXPECT_EQ(render_content(meme("m", "meanwhile in baltimore", "a baboon mounting another baboon in the serengeti",
                                  Label::hateful)),
              "A meme containing the overlaid text 'meanwhile in baltimore' on an image showing 'a baboon mounting "
              "another baboon in the serengeti'");
    EXPECT_THROW(render_content(meme("m", "x", std::nullopt, Label::hateful)), DataError);
    EXPECT_THROW(render_content(meme("m", "x", "", Label::hateful)), DataError);
}

TEST(RenderContent, PlaceholdersAreFilledOnce) {
    EXPECT_EQ(render_content(meme("m", "{caption}", "{text}", Label::hateful)),
              "A meme containing the overlaid text '{caption}' on an image showing '{text}'");
}

TEST(Demonstration, BlockLayout) {
    Demonstration d{2, "x", "A post containing 'hi'", Label::hateful, "because"};
    EXPECT_EQ(d.render(), "### EXAMPLE 2\nContent: A post containing 'hi'\nAnswer: Hateful\nRationale: because\n");
    d.rationale.clear();
    d.answer = Label::not_hateful;
    EXPECT_EQ(d.render(), "### EXAMPLE 2\nContent: A post containing 'hi'\nAnswer: Not Hateful\n");
}

TEST(Golden, CaseStudyDemonstrationsByteExact) {
    const auto dir = testing_support::source_dir() / "tests/golden";
    const auto support = load_dataset(dir / "case_study_support.jsonl", Modality::text_post);
    ASSERT_EQ(support.size(), 4u);
    const auto demos = demos_from(support);
    EXPECT_EQ(render_demonstration_section(demos), testing_support::read_text(dir / "demonstrations_case1.txt"));
}

TEST(BuildPrompt, ZeroShotIsSystemPlusQuery) {
    const auto test = meme("t1", "top", "a cat", Label::hateful);
    const auto b = build_classification_prompt(test, {});
    ASSERT_EQ(b.messages.size(), 2u);
    EXPECT_EQ(b.messages[0].role, Role::system);
    EXPECT_NE(b.messages[0].content.find("Answer with exactly 'Hateful' or 'Not Hateful' on the first line"),
              std::string::npos);
    EXPECT_EQ(b.messages[1].role, Role::user);
    EXPECT_EQ(b.messages[1].content,
              "Content: A meme containing the overlaid text 'top' on an image showing 'a cat'\nAnswer:");
    EXPECT_EQ(b.meta.test_record_id, "t1");
    EXPECT_EQ(b.meta.shots, 0u);
    EXPECT_TRUE(b.meta.demo_ids.empty());
}

TEST(BuildPrompt, ZeroShotEqualsKShotMinusSection) {
    std::mt19937_64 rng(4);
    std::vector<Record> support;
    for (int i = 0; i < 10; ++i) {
        support.push_back(post("s" + std::to_string(i), "post number " + std::to_string(i),
                               i % 2 ? Label::hateful : Label::not_hateful,
                               i % 3 ? std::optional<std::string>("r" + std::to_string(i)) : std::nullopt));
    }
    const auto test = meme("t", "query text", "caption text", Label::hateful);
    const auto zero = build_classification_prompt(test, {});
    for (std::size_t k = 0; k <= support.size(); ++k) {
        std::vector<Record> picked(support.begin(), support.begin() + static_cast<std::ptrdiff_t>(k));
        std::shuffle(picked.begin(), picked.end(), rng);
        const auto demos = demos_from(picked);
        const auto b = build_classification_prompt(test, demos);
        EXPECT_EQ(count_markers(b.messages[1].content), k);
        const auto section = render_demonstration_section(demos);
        ASSERT_TRUE(b.messages[1].content.starts_with(section));
        auto stripped = b;
        stripped.messages[1].content.erase(0, section.size());
        EXPECT_EQ(stripped.messages, zero.messages);
        EXPECT_EQ(b.meta.shots, k);
        EXPECT_TRUE(b.messages.back().content.ends_with("Answer:"));
    }
}

TEST(BuildPrompt, OrdinalGapRejected) {
    const auto test = post("t", "x", Label::hateful);
    std::vector<Demonstration> demos{{1, "a", "c", Label::hateful, ""}, {3, "b", "c", Label::hateful, ""}};
    EXPECT_THROW(build_classification_prompt(test, demos), DataError);
    std::vector<Demonstration> swapped{{2, "a", "c", Label::hateful, ""}, {1, "b", "c", Label::hateful, ""}};
    EXPECT_THROW(build_classification_prompt(test, swapped), DataError);
}

TEST(OrderDemonstrations, MostSimilarLast) {
    std::vector<Record> support{post("a", "x", Label::hateful), post("b", "y", Label::not_hateful),
                                post("c", "z", Label::hateful)};
    std::vector<RankedHit> hits{{"b", 0.9, 1}, {"c", 0.5, 2}, {"a", 0.1, 3}};
    const auto demos = order_demonstrations(hits, Strategy::bm25, support);
    ASSERT_EQ(demos.size(), 3u);
    EXPECT_EQ(demos[0].record_id, "a");
    EXPECT_EQ(demos[1].record_id, "c");
    EXPECT_EQ(demos[2].record_id, "b");
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(demos[i].ordinal, i + 1);

    const auto one = order_demonstrations(std::span(hits).first(1), Strategy::tfidf, support);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].ordinal, 1u);
    EXPECT_EQ(one[0].record_id, "b");

    const auto random = order_demonstrations(hits, Strategy::random, support);
    EXPECT_EQ(random[0].record_id, "b");
    EXPECT_EQ(random[2].record_id, "a");
}

TEST(OrderDemonstrations, UnknownIdRejected) {
    std::vector<Record> support{post("a", "x", Label::hateful)};
    std::vector<RankedHit> hits{{"zz", 1.0, 1}};
    EXPECT_THROW(order_demonstrations(hits, Strategy::bm25, support), DataError);
}

TEST(Templates, BuiltInMatchesTemplateFile) {
    const auto file = PromptTemplates::load(testing_support::source_dir() / "templates/prompts.txt");
    const auto& builtin = PromptTemplates::defaults();
    EXPECT_EQ(file, builtin);
    EXPECT_EQ(file.version, "1");
    EXPECT_EQ(file.system, builtin.system);
    EXPECT_EQ(file.post, builtin.post);
    EXPECT_EQ(file.meme, builtin.meme);
}

TEST(Templates, CustomTemplatesAndErrors) {
    const auto t = PromptTemplates::parse("version = 3\n[[system]]\nBe brief.\n\n[[post]]\nPOST {text}\n[[meme]]\nMEME {text} / {caption}\n");
    EXPECT_EQ(t.version, "3");
    EXPECT_EQ(t.system, "Be brief.");
    EXPECT_EQ(render_content(post("p", "hi", Label::hateful), t), "POST hi");
    EXPECT_EQ(render_content(meme("m", "hi", "cap", Label::hateful), t), "MEME hi / cap");
    EXPECT_THROW(PromptTemplates::parse("[[system]]\nx\n[[post]]\ny\n"), DataError);
}

TEST(Transcript, ListsMetaAndMessages) {
    std::vector<Record> support{post("a", "x", Label::hateful, "why")};
    const auto test = post("t", "q", Label::hateful);
    auto b = build_classification_prompt(test, demos_from(support));
    b.meta.strategy = Strategy::tfidf;
    b.meta.matching_key = MatchingKey::rationale;
    const auto text = transcript(b);
    EXPECT_TRUE(text.starts_with("# test_record_id: t\n# shots: 1\n# strategy: tfidf\n# matching_key: rationale\n"
                                 "# demo_ids: a\n\n=== system ===\n"));
    EXPECT_NE(text.find("=== user ===\n### EXAMPLE 1\n"), std::string::npos);
}

TEST(MessagesJson, RolesAndContent) {
    std::vector<Message> m{{Role::system, "s"}, {Role::user, "u"}, {Role::assistant, "a"}};
    EXPECT_EQ(messages_json(m).dump(),
              R"([{"content":"s","role":"system"},{"content":"u","role":"user"},{"content":"a","role":"assistant"}])");
}
