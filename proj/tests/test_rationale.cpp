#include <xicl/rationale.hpp>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace xicl;
using testing_support::TempDir;

namespace {

const DecodingParams kParams = rationale_decoding("mock");

std::vector<RationaleExemplar> post_exemplars() {
    return load_exemplars(testing_support::source_dir() / "samples/exemplars/posts.jsonl");
}

std::vector<RationaleExemplar> meme_exemplars() {
    return load_exemplars(testing_support::source_dir() / "samples/exemplars/memes.jsonl");
}

std::shared_ptr<MockBackend> scripted(const TempDir& dir, const json& script) {
    testing_support::write_text(dir / "mock.json", script.dump());
    return MockBackend::from_script(dir / "mock.json");
}

}  // namespace

TEST(RationalePrompt, ShippedExemplarsAreValid) {
    EXPECT_EQ(post_exemplars().size(), 10u);
    EXPECT_EQ(meme_exemplars().size(), 10u);
}

TEST(RationalePrompt, PostBundleLayout) {
    const auto ex = post_exemplars();
    const auto bundle = build_rationale_prompt(testing_support::post("p1", "some words", Label::hateful), ex);
    ASSERT_EQ(bundle.messages.size(), 43u);
    for (std::size_t i = 0; i < 40; i += 4) {
        const auto& e = ex[i / 4];
        EXPECT_EQ(bundle.messages[i].role, Role::user);
        EXPECT_EQ(bundle.messages[i].content,
                  "Determine whether the following post is hateful. Text: " + e.text + ":");
        EXPECT_EQ(bundle.messages[i + 1].role, Role::assistant);
        EXPECT_EQ(bundle.messages[i + 1].content, e.label == Label::hateful ? "hateful" : "not hateful");
        EXPECT_EQ(bundle.messages[i + 2].role, Role::user);
        EXPECT_TRUE(bundle.messages[i + 2].content.starts_with(
            "Briefly provide an explanation, in no more than three points, for the post being perceived as " +
            bundle.messages[i + 1].content + ". "));
        EXPECT_EQ(bundle.messages[i + 3].role, Role::assistant);
        EXPECT_EQ(bundle.messages[i + 3].content, "Answer: " + e.rationale_text);
    }
    EXPECT_EQ(bundle.messages[40].content, "Determine whether the following post is hateful. Text: some words:");
    EXPECT_EQ(bundle.messages[41].content, "hateful");
    EXPECT_EQ(bundle.messages[42].role, Role::user);
    EXPECT_EQ(bundle.messages[42].content,
              "Briefly provide an explanation, in no more than three points, for the post being perceived as "
              "hateful. Your explanation should address the targeted group, any derogatory imagery or language "
              "used, and the impact it has on perpetuating bias, stereotypes, prejudice, discrimination or "
              "inciting harm.");
}

TEST(RationalePrompt, MemeTurnsCarryCaption) {
    const auto bundle =
        build_rationale_prompt(testing_support::meme("m1", "top text", "a dog on a sofa", Label::not_hateful),
                               meme_exemplars());
    ASSERT_EQ(bundle.messages.size(), 43u);
    EXPECT_EQ(bundle.messages[40].content,
              "Determine whether the following meme is hateful. Text: top text Caption: a dog on a sofa");
    EXPECT_EQ(bundle.messages[41].content, "not hateful");
    EXPECT_NE(bundle.messages[42].content.find("for the meme being perceived as not hateful."), std::string::npos);
}

TEST(RationalePrompt, RejectsMismatchedInputs) {
    const auto posts = post_exemplars();
    EXPECT_THROW(build_rationale_prompt(testing_support::meme("m", "t", "c", Label::hateful), posts), DataError);
    EXPECT_THROW(build_rationale_prompt(testing_support::meme("m", "t", std::nullopt, Label::hateful),
                                        meme_exemplars()),
                 DataError);
    auto unlabeled = testing_support::post("p", "t", Label::hateful);
    unlabeled.label.reset();
    EXPECT_THROW(build_rationale_prompt(unlabeled, posts), DataError);
}

TEST(RationaleExemplars, Validation) {
    auto ex = post_exemplars();
    EXPECT_NO_THROW(validate_exemplars(ex));

    auto nine = ex;
    nine.pop_back();
    EXPECT_THROW(validate_exemplars(nine), DataError);

    auto skewed = ex;
    for (auto& e : skewed) {
        if (e.label == Label::not_hateful) {
            e.label = Label::hateful;
            e.rationale_text = "x\nIn summary, this post is hateful.";
            break;
        }
    }
    EXPECT_THROW(validate_exemplars(skewed), DataError);

    auto unsummarised = ex;
    unsummarised[0].rationale_text = "Targeted Group: someone";
    EXPECT_THROW(validate_exemplars(unsummarised), DataError);

    auto wrong_summary = ex;
    wrong_summary[0].rationale_text += "\nIn summary, this post is " +
                                       std::string(ex[0].label == Label::hateful ? "not hateful." : "hateful.");
    EXPECT_THROW(validate_exemplars(wrong_summary), DataError);

    auto mixed = ex;
    mixed[3].modality = Modality::meme;
    mixed[3].caption = "c";
    EXPECT_THROW(validate_exemplars(mixed), DataError);
}

TEST(RationaleExemplars, MalformedFile) {
    TempDir dir;
    testing_support::write_text(dir / "e.jsonl", R"({"modality":"text_post","text":"a"})" "\n");
    EXPECT_THROW(load_exemplars(dir / "e.jsonl"), DataError);
}

TEST(CleanRationale, StripsPrimedPrefix) {
    EXPECT_EQ(clean_rationale("Answer: Targeted Group: x"), "Targeted Group: x");
    EXPECT_EQ(clean_rationale("  \nAnswer:\n a\n b \n"), "a\n b");
    EXPECT_EQ(clean_rationale("no prefix"), "no prefix");
    EXPECT_EQ(clean_rationale("Answer: Answer: twice"), "Answer: twice");
    EXPECT_EQ(clean_rationale("Answer:   "), "");
}

TEST(GenerateRationales, WritesOneLinePerRecordInInputOrder) {
    std::vector<Record> records;
    for (int i = 0; i < 12; ++i) {
        records.push_back(testing_support::post("r" + std::to_string(i), "post number " + std::to_string(i),
                                                i % 2 ? Label::hateful : Label::not_hateful));
    }
    const auto ex = post_exemplars();
    auto hash_of = [&](std::size_t i) { return prompt_hash(build_rationale_prompt(records[i], ex).messages); };

    TempDir dir;
    auto backend = scripted(dir, {{"rules", json::array({{{"prompt_hash", hash_of(4)}, {"status", 500}},
                                                          {{"prompt_hash", hash_of(7)}, {"response", "Answer:  "}}})},
                                  {"default", "Answer: Targeted Group: none\nIn summary, this post is fine."}});
    Gateway gw(backend, ResponseCache(dir / "cache"), {2, std::chrono::milliseconds(1)});

    const auto run = generate_rationales(records, gw, ex, kParams, 3);
    ASSERT_EQ(run.lines.size(), 10u);
    ASSERT_EQ(run.failures.size(), 2u);
    EXPECT_EQ(run.failures[0].id, "r4");
    EXPECT_EQ(run.failures[1].id, "r7");
    std::vector<std::string> ids;
    for (const auto& l : run.lines) {
        ids.push_back(l.id);
        EXPECT_EQ(l.value, "Targeted Group: none\nIn summary, this post is fine.");
        EXPECT_EQ(l.producer, "mock");
        ASSERT_TRUE(l.prompt_hash);
    }
    EXPECT_EQ(ids, (std::vector<std::string>{"r0", "r1", "r2", "r3", "r5", "r6", "r8", "r9", "r10", "r11"}));
    EXPECT_EQ(*run.lines[0].prompt_hash, prompt_hash(build_rationale_prompt(records[0], ex).messages));

    const auto calls = backend->calls();
    const auto again = generate_rationales(records, gw, ex, kParams, 3);
    EXPECT_EQ(again.lines, run.lines);
    EXPECT_EQ(backend->calls() - calls, 2u);
}

TEST(GenerateRationales, DecodingIsGreedy) {
    EXPECT_EQ(kParams.temperature, 0.0);
    EXPECT_EQ(kParams.model_id, "mock");
}
