#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "posfaith/text.hpp"

namespace posfaith {

// One sentence of a document or summary, in both word and byte coordinates.
// Spans are trimmed to non-whitespace, strictly increasing by index, and
// together cover every word of the parent text.
struct SentenceSpan {
    int index = 0;
    long start_word = 0;
    long end_word = 0;    // exclusive
    long start_char = 0;  // byte offset
    long end_char = 0;    // exclusive

    long word_length() const { return end_word - start_word; }
    double midpoint_words() const { return (start_word + end_word) / 2.0; }
};

// One atomic fact extracted from a summary sentence. position_words is the
// coordinate used for positional binning: the midpoint word offset of the
// parent sentence within the summary.
struct AtomicFact {
    std::string summary_id;
    int sentence_index = 0;
    int fact_index = 0;
    std::string text;
    double position_words = 0.0;
    bool kept = true;
};

namespace detail {

// Tokens that end with '.' without ending a sentence. Lowercased, with the
// trailing period included.
inline const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> kAbbrev = {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "ca.", "approx.",
        "fig.", "figs.", "eq.", "eqs.", "sec.", "ch.", "vol.", "no.", "pp.",
        "u.s.", "u.k.", "u.n.", "inc.", "ltd.", "co.", "corp.", "dept.",
        "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.",
        "sept.", "oct.", "nov.", "dec.", "est.",
    };
    return kAbbrev;
}

// The token ending at `dot` (inclusive), scanned back over alphanumerics and
// embedded periods so "U.S." comes back whole.
inline std::string token_ending_at(std::string_view s, std::size_t dot) {
    std::size_t b = dot;
    while (b > 0) {
        const auto c = static_cast<unsigned char>(s[b - 1]);
        if (std::isalnum(c) || c == '.') --b;
        else break;
    }
    return text::to_lower(s.substr(b, dot - b + 1));
}

inline bool is_closer(char c) {
    return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}';
}

}  // namespace detail

// Deterministic sentence segmentation: a boundary is terminal punctuation
// (. ! ?), optionally followed by closing quotes or brackets, followed by
// whitespace and an uppercase letter or digit. Periods that finish a known
// abbreviation or a single-letter initial do not split.
inline std::vector<SentenceSpan> split_sentences(std::string_view input) {
    std::vector<SentenceSpan> spans;
    if (input.empty()) return spans;

    // End-of-sentence byte offsets (exclusive), then the end of input.
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const char c = input[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i;
        while (j + 1 < input.size() && (input[j + 1] == '.' || input[j + 1] == '!' || input[j + 1] == '?'))
            ++j;  // ellipses and "?!" clusters end at the last mark
        std::size_t end = j + 1;
        while (end < input.size() && detail::is_closer(input[end])) ++end;
        if (end < input.size() && std::isspace(static_cast<unsigned char>(input[end]))) {
            std::size_t k = end;
            while (k < input.size() && std::isspace(static_cast<unsigned char>(input[k]))) ++k;
            const bool next_starts_sentence =
                k < input.size() &&
                (std::isupper(static_cast<unsigned char>(input[k])) ||
                 std::isdigit(static_cast<unsigned char>(input[k])) ||
                 static_cast<unsigned char>(input[k]) >= 0x80);
            bool boundary = next_starts_sentence;
            if (boundary && c == '.' && i == j) {
                const std::string tok = detail::token_ending_at(input, i);
                if (detail::abbreviations().count(tok) > 0) boundary = false;
                else if (tok.size() == 2 && std::isalpha(static_cast<unsigned char>(tok[0])))
                    boundary = false;  // initials: "J. Smith"
            }
            if (boundary) cuts.push_back(end);
        }
        i = j;
    }
    cuts.push_back(input.size());

    long words_so_far = 0;
    std::size_t region_begin = 0;
    for (const std::size_t cut : cuts) {
        std::string_view region = input.substr(region_begin, cut - region_begin);
        // trim to non-whitespace
        std::size_t b = 0, e = region.size();
        while (b < e && std::isspace(static_cast<unsigned char>(region[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(region[e - 1]))) --e;
        if (b < e) {
            const long n_words = static_cast<long>(text::word_count(region.substr(b, e - b)));
            SentenceSpan span;
            span.index = static_cast<int>(spans.size());
            span.start_word = words_so_far;
            span.end_word = words_so_far + n_words;
            span.start_char = static_cast<long>(region_begin + b);
            span.end_char = static_cast<long>(region_begin + e);
            spans.push_back(span);
            words_so_far += n_words;
        }
        region_begin = cut;
    }
    return spans;
}

inline std::string_view sentence_text(std::string_view parent, const SentenceSpan& span) {
    return parent.substr(static_cast<std::size_t>(span.start_char),
                         static_cast<std::size_t>(span.end_char - span.start_char));
}

// Offline fallback decomposition: split on top-level coordinating
// conjunctions ("and", "but") and semicolons outside parentheses. The
// conjunction itself is dropped; a sentence without a split point is its
// own single fact.
inline std::vector<std::string> decompose_facts_rule(std::string_view sentence) {
    std::vector<std::string> facts;
    const std::string trimmed = text::trim(sentence);
    if (trimmed.empty()) return facts;

    std::vector<std::pair<std::size_t, std::size_t>> splits;  // [begin, end) of the separator
    int depth = 0;
    const auto words = text::word_spans(trimmed);
    std::size_t w = 0;
    for (std::size_t i = 0; i < trimmed.size(); ++i) {
        const char c = trimmed[i];
        if (c == '(' || c == '[') ++depth;
        else if (c == ')' || c == ']') depth = depth > 0 ? depth - 1 : 0;
        else if (c == ';' && depth == 0) splits.emplace_back(i, i + 1);
        while (w < words.size() && words[w].end <= i) ++w;
        if (w < words.size() && words[w].begin == i && depth == 0) {
            const std::string tok = text::to_lower(trimmed.substr(i, words[w].end - i));
            if (tok == "and" || tok == "but") splits.emplace_back(words[w].begin, words[w].end);
        }
    }

    std::size_t begin = 0;
    for (const auto& [sb, se] : splits) {
        if (sb < begin) continue;
        std::string piece = text::trim(std::string_view(trimmed).substr(begin, sb - begin));
        if (!piece.empty()) facts.push_back(std::move(piece));
        begin = se;
    }
    std::string tail = text::trim(std::string_view(trimmed).substr(begin));
    if (!tail.empty()) facts.push_back(std::move(tail));
    if (facts.empty()) facts.push_back(trimmed);
    return facts;
}

// Parses an LLM fact-decomposition response: one fact per line, with list
// markers ("-", "*", bullets, "1.", "1)") stripped. Blank lines are skipped.
inline std::vector<std::string> parse_fact_lines(std::string_view response) {
    std::vector<std::string> facts;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        std::size_t nl = response.find('\n', pos);
        if (nl == std::string_view::npos) nl = response.size();
        std::string line = text::trim(response.substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty()) continue;
        if (text::starts_with(line, "\xE2\x80\xA2"))  // U+2022 bullet
            line = text::trim(std::string_view(line).substr(3));
        else if (line[0] == '-' || line[0] == '*')
            line = text::trim(std::string_view(line).substr(1));
        else {
            std::size_t d = 0;
            while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
            if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')'))
                line = text::trim(std::string_view(line).substr(d + 1));
        }
        if (!line.empty()) facts.push_back(std::move(line));
    }
    return facts;
}

// Which of the fact-filter criteria to apply.
struct FactFilterOptions {
    bool drop_duplicates = true;      // exact duplicates after normalization
    int min_words = 3;                // facts shorter than this are dropped
    bool require_content_word = true; // stop-word-only facts are dropped
};

// Marks unnecessary facts kept=false, preserving order. A fact arriving with
// kept=false stays false, so the kept count never increases and the filter
// is idempotent.
inline std::vector<AtomicFact> filter_facts(std::vector<AtomicFact> facts,
                                            const FactFilterOptions& opts = {}) {
    std::unordered_set<std::string> seen;
    for (auto& fact : facts) {
        if (!fact.kept) continue;
        bool keep = true;
        if (opts.min_words > 0 &&
            text::word_count(fact.text) < static_cast<std::size_t>(opts.min_words))
            keep = false;
        if (keep && opts.require_content_word && !text::has_content_word(fact.text))
            keep = false;
        if (keep && opts.drop_duplicates) {
            const std::string norm = text::normalized_form(fact.text);
            if (!seen.insert(norm).second) keep = false;
        }
        fact.kept = keep;
    }
    return facts;
}

// Builds AtomicFacts for one summary given a decomposition function
// (rule-based or an LLM-backed closure). Facts inherit the midpoint word
// offset of their parent sentence.
template <typename DecomposeFn>
inline std::vector<AtomicFact> decompose_summary(const std::string& summary_id,
                                                 std::string_view summary_text,
                                                 const std::vector<SentenceSpan>& sentences,
                                                 DecomposeFn&& decompose) {
    std::vector<AtomicFact> facts;
    for (const auto& span : sentences) {
        const std::string sent(sentence_text(summary_text, span));
        int j = 0;
        for (auto& fact_text : decompose(sent)) {
            AtomicFact fact;
            fact.summary_id = summary_id;
            fact.sentence_index = span.index;
            fact.fact_index = j++;
            fact.text = std::move(fact_text);
            fact.position_words = span.midpoint_words();
            facts.push_back(std::move(fact));
        }
    }
    return facts;
}

}  // namespace posfaith
