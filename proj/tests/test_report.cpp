#include <xicl/report.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace xicl;

namespace {

struct Row {
    std::size_t shots;
    Strategy strategy;
    std::optional<MatchingKey> key;
    double acc;
    double f1;
};

// Mistral-7B, FHM column of the published results table.
const std::vector<Row> kMistralFhm{
    {0, Strategy::none, std::nullopt, 0.614, 0.594},
    {4, Strategy::random, std::nullopt, 0.618, 0.613},
    {4, Strategy::tfidf, MatchingKey::content, 0.634, 0.634},
    {4, Strategy::tfidf, MatchingKey::rationale, 0.618, 0.618},
    {4, Strategy::bm25, MatchingKey::content, 0.658, 0.657},
    {4, Strategy::bm25, MatchingKey::rationale, 0.598, 0.596},
    {8, Strategy::random, std::nullopt, 0.620, 0.611},
    {8, Strategy::tfidf, MatchingKey::content, 0.642, 0.641},
    {8, Strategy::tfidf, MatchingKey::rationale, 0.626, 0.625},
    {8, Strategy::bm25, MatchingKey::content, 0.660, 0.658},
    {8, Strategy::bm25, MatchingKey::rationale, 0.612, 0.608},
    {16, Strategy::random, std::nullopt, 0.618, 0.610},
    {16, Strategy::tfidf, MatchingKey::content, 0.644, 0.644},
    {16, Strategy::tfidf, MatchingKey::rationale, 0.632, 0.631},
    {16, Strategy::bm25, MatchingKey::content, 0.638, 0.636},
    {16, Strategy::bm25, MatchingKey::rationale, 0.614, 0.611},
};

ReportCell cell(const std::string& model, const Row& r) {
    ReportCell c;
    c.cell.model = model;
    c.cell.shots = r.shots;
    c.cell.strategy = r.strategy;
    c.cell.matching_key = r.key;
    c.cell.name = model + "__" + std::to_string(r.shots) + "shot__" + std::string(to_string(r.strategy)) +
                  (r.key ? "__" + std::string(to_string(*r.key)) : "");
    c.metrics.accuracy = r.acc;
    c.metrics.macro_f1 = r.f1;
    c.metrics.n_total = 500;
    c.metrics.test_fingerprint = "fhm-dev-seen";
    return c;
}

std::vector<ReportCell> table(const std::string& model) {
    std::vector<ReportCell> out;
    for (const auto& r : kMistralFhm) out.push_back(cell(model, r));
    return out;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST(Report, RowOrderIsIndependentOfInputOrder) {
    auto cells = table("Mistral-7B");
    const auto expected = emit_table(cells, TableFormat::csv);
    std::mt19937 rng(5);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(cells.begin(), cells.end(), rng);
        ASSERT_EQ(emit_table(cells, TableFormat::csv), expected);
    }
    const auto ordered = order_rows(cells);
    ASSERT_EQ(ordered.size(), 16u);
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        EXPECT_EQ(ordered[i].metrics.accuracy, kMistralFhm[i].acc) << i;
    }
}

TEST(Report, ModelsKeepFirstAppearanceOrder) {
    auto cells = table("Qwen2-7B");
    for (auto& c : table("Mistral-7B")) cells.push_back(c);
    const auto rows = order_rows(cells);
    EXPECT_EQ(rows.front().cell.model, "Qwen2-7B");
    EXPECT_EQ(rows[16].cell.model, "Mistral-7B");
}

TEST(Report, CsvLayout) {
    const auto out = lines(emit_table(table("Mistral-7B"), TableFormat::csv));
    ASSERT_EQ(out.size(), 17u);
    EXPECT_EQ(out[0], "Model,# Shots,Dem. Samp.,Matching,Acc.,F1,# Invalids");
    EXPECT_EQ(out[1], "Mistral-7B,0-shot,-,-,0.614,0.594,0");
    EXPECT_EQ(out[2], "Mistral-7B,4-shots,Random,-,0.618,0.613,0");
    EXPECT_EQ(out[3], "Mistral-7B,4-shots,TF-IDF,Text,0.634,0.634,0");
    EXPECT_EQ(out[4], "Mistral-7B,4-shots,TF-IDF,Rationale,0.618,0.618,0");
    EXPECT_EQ(out[5], "Mistral-7B,4-shots,BM-25,Text,0.658,0.657,0");
    EXPECT_EQ(out[16], "Mistral-7B,16-shots,BM-25,Rationale,0.614,0.611,0");
}

TEST(Report, MemeSupportIsLabelledTextPlusCaption) {
    auto c = cell("m", {4, Strategy::bm25, MatchingKey::content, 0.5, 0.5});
    c.cell.support_modality = Modality::meme;
    EXPECT_EQ(matching_label(c.cell), "Text + Cap.");
    const auto csv = emit_table({c}, TableFormat::csv);
    EXPECT_NE(csv.find(",Text + Cap.,"), std::string::npos);
}

TEST(Report, MarkdownMarksCellsBelowZeroShot) {
    const auto md = emit_table(table("Mistral-7B"), TableFormat::markdown);
    const auto out = lines(md);
    EXPECT_EQ(out[0], "| Model | # Shots | Dem. Samp. | Matching | Acc. | F1 | # Invalids |");
    EXPECT_EQ(out[2], "| Mistral-7B | 0-shot | - | - | 0.614 | 0.594 | 0 |");
    std::vector<std::string> starred;
    for (const auto& l : out) {
        if (l.find("*") != std::string::npos && l.starts_with("| ")) starred.push_back(l);
    }
    ASSERT_EQ(starred.size(), 2u);
    EXPECT_EQ(starred[0], "| Mistral-7B | 4-shots | BM-25 | Rationale | 0.598* | 0.596 | 0 |");
    EXPECT_EQ(starred[1], "| Mistral-7B | 8-shots | BM-25 | Rationale | 0.612* | 0.608 | 0 |");
    EXPECT_NE(md.find("below the zero-shot baseline"), std::string::npos);
}

TEST(Report, ZeroShotComparison) {
    const auto rows = table("Mistral-7B");
    const auto& zero = rows[0].metrics;
    EXPECT_EQ(compare_zero_shot(rows[9].metrics, zero), Comparison::above);   // 8-shot BM-25 Text 0.660
    EXPECT_EQ(compare_zero_shot(rows[5].metrics, zero), Comparison::below);   // 4-shot BM-25 Rationale 0.598
    EXPECT_EQ(compare_zero_shot(rows[15].metrics, zero), Comparison::equal);  // 16-shot BM-25 Rationale 0.614

    auto other_set = rows[9].metrics;
    other_set.test_fingerprint = "mami-test";
    EXPECT_THROW(compare_zero_shot(other_set, zero), DataError);
    auto other_policy = rows[9].metrics;
    other_policy.invalid_policy = InvalidPolicy::exclude;
    EXPECT_THROW(compare_zero_shot(other_policy, zero), DataError);
}

TEST(Report, NoBaselineNoMark) {
    auto rows = table("Mistral-7B");
    rows.erase(rows.begin());
    const auto md = emit_table(rows, TableFormat::markdown);
    EXPECT_EQ(md.find("*"), std::string::npos);
}

TEST(Report, Formatting) {
    EXPECT_EQ(format3(0.6136), "0.614");
    EXPECT_EQ(format3(7.0 / 12.0), "0.583");
    EXPECT_EQ(shots_label(0), "0-shot");
    EXPECT_EQ(shots_label(16), "16-shots");
    EXPECT_EQ(parse_table_format("md"), TableFormat::markdown);
    EXPECT_THROW(parse_table_format("html"), UsageError);
    EXPECT_EQ(detail::csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(detail::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Report, ScoresPredictionsFiles) {
    testing_support::TempDir dir;
    CellDescriptor d{"c", "m", 0, Strategy::none, std::nullopt, Modality::text_post, InvalidPolicy::count_as_wrong};
    ordered_json header = {{"type", "header"}, {"config_hash", "abc"}, {"cell", to_json(d)}};
    std::string body = header.dump() + "\n";
    const std::vector<std::pair<Label, ParsedLabel>> rows{{Label::hateful, ParsedLabel::hateful},
                                                          {Label::hateful, ParsedLabel::not_hateful},
                                                          {Label::not_hateful, ParsedLabel::not_hateful},
                                                          {Label::not_hateful, ParsedLabel::invalid}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        PredictionRecord p;
        p.test_id = "t" + std::to_string(i);
        p.gold_label = rows[i].first;
        p.parsed_label = rows[i].second;
        body += to_json(p).dump() + "\n";
    }
    testing_support::write_text(dir / "c.jsonl", body);
    const std::vector<fs::path> files{dir / "c.jsonl"};

    const auto scored = score_files(files);
    ASSERT_EQ(scored.size(), 1u);
    EXPECT_NEAR(scored[0].metrics.macro_f1, 7.0 / 12.0, 1e-12);
    EXPECT_EQ(scored[0].metrics.n_invalid, 1u);

    const auto excluded = score_files(files, InvalidPolicy::exclude);
    EXPECT_NEAR(excluded[0].metrics.accuracy, 2.0 / 3.0, 1e-12);
    EXPECT_EQ(excluded[0].cell.invalid_policy, InvalidPolicy::exclude);
}
