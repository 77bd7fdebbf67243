#include <catch2/catch_amalgamated.hpp>

#include "posfaith/text.hpp"

using namespace posfaith;

TEST_CASE("word counting is whitespace-run based", "[text]") {
    CHECK(text::word_count("") == 0);
    CHECK(text::word_count("   \t\n") == 0);
    CHECK(text::word_count("one") == 1);
    CHECK(text::word_count("one two  three") == 3);
    CHECK(text::word_count("hy-phen isn't split, punctuation. stays") == 5);
}

TEST_CASE("unicode spaces separate words", "[text]") {
    // U+00A0 no-break space and U+2003 em space both break words
    CHECK(text::word_count("a\xC2\xA0") == 1);
    CHECK(text::word_count("a\xC2\xA0types") == 2);
    CHECK(text::word_count("a\xE2\x80\x83types") == 2);
}

TEST_CASE("normalize_tokens lowers and strips punctuation", "[text]") {
    const auto toks = text::normalize_tokens("The cat, sat -- ON a mat!");
    REQUIRE(toks == std::vector<std::string>{"the", "cat", "sat", "on", "a", "mat"});
    CHECK(text::normalize_tokens("...").empty());
    CHECK(text::normalized_form("A  cat!") == "a cat");
}

TEST_CASE("ngrams join tokens without collisions", "[text]") {
    const std::vector<std::string> toks = {"a", "b", "c", "d"};
    CHECK(text::ngrams(toks, 3).size() == 2);
    CHECK(text::ngrams(toks, 5).empty());
    // "ab"+"c" must differ from "a"+"bc"
    const auto g1 = text::ngrams({"ab", "c"}, 2);
    const auto g2 = text::ngrams({"a", "bc"}, 2);
    CHECK(g1 != g2);
}

TEST_CASE("token estimate", "[text]") {
    CHECK(text::estimate_tokens(0) == 0);
    CHECK(text::estimate_tokens(75) == 100);
    CHECK(text::estimate_tokens(150) == 200);
    CHECK(text::estimate_tokens(1) == 2);
}

TEST_CASE("content word detection uses the stopword list", "[text]") {
    CHECK_FALSE(text::has_content_word("he is the"));
    CHECK(text::has_content_word("he is the winner"));
    CHECK_FALSE(text::has_content_word(""));
}

TEST_CASE("fnv1a64 is stable", "[text]") {
    CHECK(text::fnv1a64("") == 14695981039346656037ULL);
    CHECK(text::fnv1a64("a") != text::fnv1a64("b"));
    CHECK(text::hex64(0x1234abcdULL) == "000000001234abcd");
}
