#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "posfaith/scorers.hpp"
#include "test_util.hpp"

using namespace posfaith;

namespace {

// Independent ROUGE-L oracle: full-table LCS plus the P/R/F arithmetic,
// sharing no code with the implementation.
double rouge_l_oracle(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    if (ref.empty() || hyp.empty()) return 0.0;
    std::vector<std::vector<int>> dp(ref.size() + 1, std::vector<int>(hyp.size() + 1, 0));
    for (std::size_t i = 1; i <= ref.size(); ++i)
        for (std::size_t j = 1; j <= hyp.size(); ++j)
            dp[i][j] = ref[i - 1] == hyp[j - 1]
                           ? dp[i - 1][j - 1] + 1
                           : std::max(dp[i - 1][j], dp[i][j - 1]);
    const int lcs = dp[ref.size()][hyp.size()];
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(hyp.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

std::string join(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& t : toks) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

}  // namespace

TEST_CASE("rouge_l basics", "[scorers]") {
    CHECK(rouge_l("the cat sat", "the cat sat") == 1.0);
    CHECK(rouge_l("alpha beta", "gamma delta") == 0.0);
    CHECK(rouge_l("", "anything") == 0.0);
    CHECK(rouge_l("anything", "") == 0.0);
    CHECK(rouge_l("...", "cat") == 0.0);  // punctuation-only side normalizes to empty
}

TEST_CASE("rouge_l worked example", "[scorers]") {
    // LCS("the cat sat on the mat", "the cat on a mat") = 4
    // P = 4/5, R = 4/6, F = 0.7272..
    const double f = rouge_l("the cat sat on the mat", "the cat on a mat");
    CHECK(f == Catch::Approx(0.727).margin(0.0005));
    CHECK(f == Catch::Approx(rouge_l_oracle({"the", "cat", "sat", "on", "the", "mat"},
                                            {"the", "cat", "on", "a", "mat"})).epsilon(1e-14));
}

TEST_CASE("rouge_l matches the DP oracle on random pairs", "[scorers]") {
    std::mt19937 rng(41);
    std::uniform_int_distribution<int> len(0, 20);
    for (int round = 0; round < 300; ++round) {
        std::vector<std::string> a, b;
        const int na = len(rng), nb = len(rng);
        for (int i = 0; i < na; ++i) a.push_back(testutil::random_word(rng));
        for (int i = 0; i < nb; ++i) b.push_back(testutil::random_word(rng));
        const double expected = rouge_l_oracle(a, b);
        const double actual = rouge_l(join(a), join(b));
        CHECK(std::abs(actual - expected) < 1e-12);
        // F is symmetric: P and R swap roles
        CHECK(rouge_l(join(a), join(b)) == Catch::Approx(rouge_l(join(b), join(a))).margin(1e-15));
        if (na > 0) CHECK(rouge_l(join(a), join(a)) == 1.0);
    }
}

namespace {

// Deterministic test backend: score of (premise, fact) read from a table
// keyed by the premise text.
class TableBackend final : public ScorerBackend {
public:
    explicit TableBackend(std::map<std::string, double> table) : table_(std::move(table)) {}
    std::string kind() const override { return "table"; }
    double score_pair(const std::string& premise, const std::string&) const override {
        auto it = table_.find(premise);
        return it == table_.end() ? 0.0 : it->second;
    }

private:
    std::map<std::string, double> table_;
};

AtomicFact fact_of(const std::string& text, int sentence = 0, int index = 0,
                   const std::string& summary_id = "s") {
    AtomicFact f;
    f.summary_id = summary_id;
    f.sentence_index = sentence;
    f.fact_index = index;
    f.text = text;
    return f;
}

}  // namespace

TEST_CASE("score_fact takes the maximum over source sentences", "[scorers]") {
    const Document doc = make_document("d", "First one. Second one. Third one.");
    REQUIRE(doc.sentences.size() == 3);
    TableBackend backend({{"First one.", 0.2}, {"Second one.", 0.9}, {"Third one.", 0.5}});
    const FactScore fs = score_fact(fact_of("whatever fact"), doc, backend);
    CHECK(fs.score == 0.9);
    CHECK(fs.argmax_sentence == 1);

    SECTION("single-sentence document is the identity") {
        const Document single = make_document("d1", "Only sentence here.");
        TableBackend b({{"Only sentence here.", 0.42}});
        const FactScore one = score_fact(fact_of("f"), single, b);
        CHECK(one.score == 0.42);
        CHECK(one.argmax_sentence == 0);
    }
    SECTION("ties break to the smallest sentence index") {
        TableBackend tied({{"First one.", 0.7}, {"Second one.", 0.7}, {"Third one.", 0.7}});
        CHECK(score_fact(fact_of("f"), doc, tied).argmax_sentence == 0);
    }
    SECTION("empty document errors") {
        const Document empty = make_document("d0", "");
        CHECK_THROWS_AS(score_fact(fact_of("f"), empty, backend), DataError);
    }
}

TEST_CASE("score_fact with rouge_l equals exhaustive brute force", "[scorers]") {
    std::mt19937 rng(43);
    RougeLBackend backend;
    for (int round = 0; round < 50; ++round) {
        std::uniform_int_distribution<int> n_sent(1, 8);
        std::string doc_text;
        const int n = n_sent(rng);
        for (int i = 0; i < n; ++i) {
            if (!doc_text.empty()) doc_text.push_back(' ');
            doc_text += testutil::random_sentence(rng);
        }
        const Document doc = make_document("d", doc_text);
        const std::string fact = testutil::random_sentence(rng);

        double best = -1.0;
        int best_idx = 0;
        for (const auto& span : doc.sentences) {
            const double s = rouge_l(std::string(sentence_text(doc.text, span)), fact);
            if (s > best) {
                best = s;
                best_idx = span.index;
            }
        }
        const FactScore fs = score_fact(fact_of(fact), doc, backend);
        CHECK(fs.score == best);  // bit-exact
        CHECK(fs.argmax_sentence == best_idx);
    }
}

TEST_CASE("score_fact is permutation-invariant and append-monotone", "[scorers]") {
    std::mt19937 rng(47);
    RougeLBackend backend;
    for (int round = 0; round < 30; ++round) {
        std::vector<std::string> sentences;
        for (int i = 0; i < 5; ++i) sentences.push_back(testutil::random_sentence(rng));
        const std::string fact = testutil::random_sentence(rng);
        auto doc_from = [](const std::vector<std::string>& sents) {
            std::string text;
            for (const auto& s : sents) {
                if (!text.empty()) text.push_back(' ');
                text += s;
            }
            return make_document("d", text);
        };
        const double base = score_fact(fact_of(fact), doc_from(sentences), backend).score;
        auto shuffled = sentences;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(score_fact(fact_of(fact), doc_from(shuffled), backend).score == base);
        auto extended = sentences;
        extended.push_back(testutil::random_sentence(rng));
        CHECK(score_fact(fact_of(fact), doc_from(extended), backend).score >= base);
    }
}

TEST_CASE("sentence_faithfulness reproduces the worked example", "[scorers]") {
    // first sentence of the published example
    const std::vector<double> first = {0.92, 0.90, 0.87, 0.96, 0.93};
    CHECK(sentence_faithfulness(first) == Catch::Approx(0.916).margin(1e-12));
    // last sentence of the published example
    const std::vector<double> last = {0.87, 0.91, 0.14, 0.81, 0.30, 0.11, 0.15};
    CHECK(sentence_faithfulness(last) == Catch::Approx(0.47).margin(1e-12));

    CHECK(sentence_faithfulness(std::vector<double>{0.31}) == 0.31);
    CHECK_THROWS_WITH(sentence_faithfulness(std::vector<double>{}),
                      "sentence has no kept facts");
}

TEST_CASE("sentence_faithfulness stays within its inputs", "[scorers]") {
    std::mt19937 rng(53);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> scores;
        const int n = 1 + static_cast<int>(rng() % 10);
        for (int i = 0; i < n; ++i) scores.push_back(unit(rng));
        const double mean = sentence_faithfulness(scores);
        CHECK(mean >= *std::min_element(scores.begin(), scores.end()) - 1e-15);
        CHECK(mean <= *std::max_element(scores.begin(), scores.end()) + 1e-15);
    }
}

namespace {

std::vector<FactScore> scores_of(const std::vector<double>& values) {
    std::vector<FactScore> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        FactScore fs;
        fs.fact = fact_of("f" + std::to_string(i), 0, static_cast<int>(i));
        fs.score = values[i];
        out.push_back(fs);
    }
    return out;
}

}  // namespace

TEST_CASE("overall_faithfulness thresholds and percentages", "[scorers]") {
    CHECK(overall_faithfulness(scores_of({1.0, 1.0, 1.0})) == 100.0);
    CHECK(overall_faithfulness(scores_of({0.9, 0.4}), 0.5) == 50.0);
    // the published agreement arithmetic reused: 515 of 543 at threshold 0.5
    std::vector<double> labels(543, 0.0);
    for (int i = 0; i < 515; ++i) labels[static_cast<std::size_t>(i)] = 1.0;
    const double pct = overall_faithfulness(scores_of(labels), 0.5);
    CHECK(std::round(pct * 10.0) / 10.0 == 94.8);
    CHECK_THROWS_AS(overall_faithfulness({}), DataError);
}

TEST_CASE("human label backend maps labels exactly", "[scorers]") {
    testutil::TempDir tmp;
    const std::string path = tmp.file("labels.jsonl");
    testutil::write_file(path,
        R"({"summary_id": "s", "sentence_index": 0, "fact_index": 0, "label": true, "annotator": "a1"})" "\n"
        R"({"summary_id": "s", "sentence_index": 0, "fact_index": 1, "label": false, "annotator": "a1"})" "\n");
    HumanLabelBackend backend(path);
    CHECK(backend.size() == 2);
    CHECK(backend.score(fact_of("x", 0, 0)) == 1.0);
    CHECK(backend.score(fact_of("x", 0, 1)) == 0.0);
    CHECK_THROWS_AS(backend.score(fact_of("x", 0, 2)), DataError);
    CHECK_FALSE(backend.pairwise());

    SECTION("score_summary pulls labels per fact") {
        const Document doc = make_document("d", "Anything here.");
        std::vector<AtomicFact> facts = {fact_of("x", 0, 0), fact_of("x", 0, 1)};
        const auto scored = score_summary(facts, doc, backend);
        REQUIRE(scored.size() == 2);
        CHECK(scored[0].score == 1.0);
        CHECK(scored[1].score == 0.0);
    }
}

TEST_CASE("score_summary order and filtering", "[scorers]") {
    const Document doc = make_document("d", "First one. Second one.");
    TableBackend backend({{"First one.", 0.3}, {"Second one.", 0.6}});

    SECTION("no kept facts gives an empty list") {
        std::vector<AtomicFact> facts = {fact_of("a", 0, 0)};
        facts[0].kept = false;
        CHECK(score_summary(facts, doc, backend).empty());
    }
    SECTION("canonical (sentence, fact) order regardless of input order") {
        std::vector<AtomicFact> facts = {fact_of("d", 1, 1), fact_of("a", 0, 0),
                                         fact_of("c", 1, 0), fact_of("b", 0, 1)};
        const auto scored = score_summary(facts, doc, backend);
        REQUIRE(scored.size() == 4);
        CHECK(scored[0].fact.text == "a");
        CHECK(scored[1].fact.text == "b");
        CHECK(scored[2].fact.text == "c");
        CHECK(scored[3].fact.text == "d");
        for (const auto& fs : scored) CHECK(fs.score == 0.6);  // max over both sentences
    }
    SECTION("rouge backend matches per-fact brute force") {
        std::mt19937 rng(59);
        RougeLBackend rouge;
        std::string doc_text;
        for (int i = 0; i < 4; ++i) {
            if (!doc_text.empty()) doc_text.push_back(' ');
            doc_text += testutil::random_sentence(rng);
        }
        const Document toy = make_document("toy", doc_text);
        std::vector<AtomicFact> facts;
        for (int i = 0; i < 6; ++i)
            facts.push_back(fact_of(testutil::random_sentence(rng), i / 3, i % 3));
        const auto scored = score_summary(facts, toy, rouge);
        REQUIRE(scored.size() == facts.size());
        for (const auto& fs : scored) {
            double best = -1.0;
            for (const auto& span : toy.sentences)
                best = std::max(best,
                                rouge_l(std::string(sentence_text(toy.text, span)), fs.fact.text));
            CHECK(fs.score == best);
        }
    }
}

TEST_CASE("fact score JSON round-trips", "[scorers]") {
    FactScore fs;
    fs.fact = fact_of("Sara plays tennis.", 2, 1, "sum-9");
    fs.fact.position_words = 14.5;
    fs.fact.kept = true;
    fs.score = 0.875;
    fs.argmax_sentence = 3;
    const auto j = fact_score_to_json(fs);
    const FactScore back = fact_score_from_json(j);
    CHECK(back.fact.summary_id == fs.fact.summary_id);
    CHECK(back.fact.sentence_index == fs.fact.sentence_index);
    CHECK(back.fact.fact_index == fs.fact.fact_index);
    CHECK(back.fact.text == fs.fact.text);
    CHECK(back.fact.position_words == fs.fact.position_words);
    CHECK(back.score == fs.score);
    CHECK(back.argmax_sentence == fs.argmax_sentence);
}
