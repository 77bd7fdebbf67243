#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>

#include "posfaith/segment.hpp"
#include "test_util.hpp"

using namespace posfaith;

TEST_CASE("split_sentences basics", "[segment]") {
    CHECK(split_sentences("A cat. A dog.").size() == 2);
    CHECK(split_sentences("").empty());
    CHECK(split_sentences("   \n ").empty());
    CHECK(split_sentences("no terminal punctuation at all").size() == 1);
    CHECK(split_sentences("One! Two? Three.").size() == 3);
}

TEST_CASE("abbreviations and initials do not split", "[segment]") {
    CHECK(split_sentences("Dr. Smith ran. He won.").size() == 2);
    CHECK(split_sentences("The U.S. Senate met. It adjourned.").size() == 2);
    CHECK(split_sentences("See Fig. 3 for details. Then continue.").size() == 2);
    CHECK(split_sentences("Results by Smith et al. Are strong.").size() == 1);
    CHECK(split_sentences("J. Smith arrived. He spoke.").size() == 2);
}

TEST_CASE("decimal numbers and lowercase continuations do not split", "[segment]") {
    CHECK(split_sentences("It costs 3.14 dollars. Cheap.").size() == 2);
    CHECK(split_sentences("it ended. but quietly").size() == 1);
}

TEST_CASE("span coordinates are consistent", "[segment]") {
    const std::string input = "A cat sat. Then a dog barked loudly. End.";
    const auto spans = split_sentences(input);
    REQUIRE(spans.size() == 3);
    CHECK(spans[0].start_word == 0);
    CHECK(spans[0].end_word == 3);
    CHECK(spans[1].start_word == 3);
    CHECK(spans[1].end_word == 8);
    CHECK(spans[2].end_word == 9);
    CHECK(sentence_text(input, spans[0]) == "A cat sat.");
    CHECK(sentence_text(input, spans[2]) == "End.");
}

TEST_CASE("spans reassemble to the input word sequence", "[segment]") {
    std::mt19937 rng(7);
    for (int round = 0; round < 50; ++round) {
        std::string doc;
        std::uniform_int_distribution<int> n_sent(1, 8);
        const int n = n_sent(rng);
        for (int i = 0; i < n; ++i) {
            if (!doc.empty()) doc += (round % 3 == 0 ? "\n" : " ");
            doc += testutil::random_sentence(rng);
        }
        const auto spans = split_sentences(doc);
        // strictly increasing, non-overlapping, contiguous word coverage
        long expected_start = 0;
        std::string reassembled;
        for (const auto& s : spans) {
            CHECK(s.start_word == expected_start);
            CHECK(s.start_word < s.end_word);
            expected_start = s.end_word;
            if (!reassembled.empty()) reassembled.push_back(' ');
            reassembled += sentence_text(doc, s);
        }
        CHECK(static_cast<std::size_t>(expected_start) == text::word_count(doc));
        CHECK(text::normalize_tokens(reassembled) == text::normalize_tokens(doc));
    }
}

TEST_CASE("decompose_facts_rule splits top-level conjunctions", "[segment]") {
    // rule trace: one split point at "and"
    const auto facts = decompose_facts_rule("X was born in 1996 and plays tennis.");
    REQUIRE(facts.size() == 2);
    CHECK(facts[0] == "X was born in 1996");
    CHECK(facts[1] == "plays tennis.");

    CHECK(decompose_facts_rule("X plays tennis.") ==
          std::vector<std::string>{"X plays tennis."});
    CHECK(decompose_facts_rule("").empty());
    CHECK(decompose_facts_rule("A runs; B walks.").size() == 2);
    // parenthesized conjunctions stay put
    CHECK(decompose_facts_rule("He won (gold and silver) medals.").size() == 1);
    CHECK(decompose_facts_rule("sandy beaches").size() == 1);  // embedded "and" is no split
}

TEST_CASE("decompose_facts_rule preserves content words exactly once", "[segment]") {
    std::mt19937 rng(11);
    for (int round = 0; round < 60; ++round) {
        // random sentence with conjunctions sprinkled in
        std::string sent;
        std::uniform_int_distribution<int> n_clauses(1, 4);
        const int n = n_clauses(rng);
        for (int i = 0; i < n; ++i) {
            if (i > 0) sent += (rng() % 2 == 0) ? " and " : " but ";
            for (int w = 0; w < 3; ++w) {
                if (!sent.empty() && sent.back() != ' ') sent.push_back(' ');
                sent += testutil::random_word(rng);
            }
        }
        sent.push_back('.');

        std::map<std::string, int> before, after;
        for (const auto& tok : text::normalize_tokens(sent))
            if (!text::is_stopword(tok)) ++before[tok];
        for (const auto& fact : decompose_facts_rule(sent))
            for (const auto& tok : text::normalize_tokens(fact))
                if (!text::is_stopword(tok)) ++after[tok];
        CHECK(before == after);
    }
}

TEST_CASE("parse_fact_lines strips list markers", "[segment]") {
    CHECK(parse_fact_lines("- A.\n- B.") == std::vector<std::string>{"A.", "B."});
    CHECK(parse_fact_lines("1. First fact\n2. Second fact") ==
          std::vector<std::string>{"First fact", "Second fact"});
    CHECK(parse_fact_lines("\xE2\x80\xA2 Bullet fact") ==
          std::vector<std::string>{"Bullet fact"});
    CHECK(parse_fact_lines("plain line") == std::vector<std::string>{"plain line"});
    CHECK(parse_fact_lines("").empty());
    CHECK(parse_fact_lines("\n\n  \n").empty());
}

namespace {

std::vector<AtomicFact> make_facts(const std::vector<std::string>& texts) {
    std::vector<AtomicFact> facts;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        AtomicFact f;
        f.summary_id = "s";
        f.sentence_index = 0;
        f.fact_index = static_cast<int>(i);
        f.text = texts[i];
        facts.push_back(f);
    }
    return facts;
}

long kept_count(const std::vector<AtomicFact>& facts) {
    long n = 0;
    for (const auto& f : facts)
        if (f.kept) ++n;
    return n;
}

}  // namespace

TEST_CASE("filter_facts criteria", "[segment]") {
    SECTION("duplicates after normalization") {
        auto out = filter_facts(make_facts({"The cat sat down.", "the CAT sat down"}));
        REQUIRE(out.size() == 2);
        CHECK(out[0].kept);
        CHECK_FALSE(out[1].kept);
    }
    SECTION("short facts dropped") {
        auto out = filter_facts(make_facts({"He is."}));
        CHECK_FALSE(out[0].kept);
    }
    SECTION("stop-word-only facts dropped") {
        auto out = filter_facts(make_facts({"it was that and this"}));
        CHECK_FALSE(out[0].kept);
    }
    SECTION("distinct content-bearing facts all kept") {
        auto out = filter_facts(make_facts({
            "Sara plays tennis professionally.", "Sara was born in 1996.",
            "Sara lives in Spain today.", "The river crosses the canyon.",
            "Copper lanterns light the harbor."}));
        CHECK(kept_count(out) == 5);
    }
}

TEST_CASE("filter_facts is idempotent and never revives facts", "[segment]") {
    std::mt19937 rng(23);
    for (int round = 0; round < 40; ++round) {
        std::vector<std::string> texts;
        std::uniform_int_distribution<int> n_facts(0, 10);
        const int n = n_facts(rng);
        for (int i = 0; i < n; ++i) {
            switch (rng() % 4) {
                case 0: texts.push_back(testutil::random_sentence(rng)); break;
                case 1: texts.push_back("He is."); break;
                case 2: texts.push_back("it was that"); break;
                default:
                    texts.push_back(texts.empty() ? testutil::random_sentence(rng)
                                                  : texts.back());
            }
        }
        auto facts = make_facts(texts);
        // randomly pre-drop some
        for (auto& f : facts) f.kept = rng() % 4 != 0;
        const long before = kept_count(facts);
        const auto once = filter_facts(facts);
        const auto twice = filter_facts(once);
        CHECK(kept_count(once) <= before);
        REQUIRE(once.size() == twice.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(once[i].kept == twice[i].kept);
            CHECK(once[i].text == twice[i].text);
        }
    }
}

TEST_CASE("decompose_summary assigns coordinates", "[segment]") {
    const std::string summary = "Alpha beta gamma delta. Epsilon zeta eta theta iota.";
    const auto spans = split_sentences(summary);
    REQUIRE(spans.size() == 2);
    const auto facts = decompose_summary("sum-1", summary, spans, [](const std::string& s) {
        return decompose_facts_rule(s);
    });
    REQUIRE(facts.size() == 2);
    CHECK(facts[0].sentence_index == 0);
    CHECK(facts[0].fact_index == 0);
    CHECK(facts[0].position_words == Catch::Approx(2.0));  // midpoint of [0,4)
    CHECK(facts[1].sentence_index == 1);
    CHECK(facts[1].position_words == Catch::Approx(6.5));  // midpoint of [4,9)
    // any sentence with a content word yields at least one fact
    for (const auto& span : spans) {
        const auto piece = sentence_text(summary, span);
        if (text::has_content_word(piece))
            CHECK_FALSE(decompose_facts_rule(piece).empty());
    }
}
