#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace posfaith::text {

// Decodes one UTF-8 code point starting at `pos`. Invalid bytes are passed
// through as single-byte code points so malformed input never throws.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    len = 1;
    if (b0 < 0x80) return b0;
    std::size_t need = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) { need = 1; cp = b0 & 0x1F; }
    else if ((b0 & 0xF0) == 0xE0) { need = 2; cp = b0 & 0x0F; }
    else if ((b0 & 0xF8) == 0xF0) { need = 3; cp = b0 & 0x07; }
    else return b0;
    for (std::size_t k = 1; k <= need; ++k) {
        if (pos + k >= s.size()) return b0;
        const auto bk = static_cast<unsigned char>(s[pos + k]);
        if ((bk & 0xC0) != 0x80) return b0;
        cp = (cp << 6) | (bk & 0x3F);
    }
    len = need + 1;
    return cp;
}

// Unicode white space as far as word boundaries are concerned: the ASCII
// set plus the common space-like code points seen in scraped text.
inline bool is_space_cp(char32_t cp) {
    switch (cp) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
        case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
        case 0x205F: case 0x3000: case 0x200B: case 0xFEFF:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

struct WordSpan {
    std::size_t begin = 0;  // byte offset
    std::size_t end = 0;    // exclusive
};

// A word is a maximal run of non-whitespace code points. This single
// definition feeds word counts, sentence spans, and positional binning.
inline std::vector<WordSpan> word_spans(std::string_view s) {
    std::vector<WordSpan> out;
    std::size_t i = 0;
    bool in_word = false;
    std::size_t word_begin = 0;
    while (i < s.size()) {
        std::size_t len = 1;
        const char32_t cp = decode_utf8(s, i, len);
        if (is_space_cp(cp)) {
            if (in_word) {
                out.push_back({word_begin, i});
                in_word = false;
            }
        } else if (!in_word) {
            in_word = true;
            word_begin = i;
        }
        i += len;
    }
    if (in_word) out.push_back({word_begin, s.size()});
    return out;
}

inline std::size_t word_count(std::string_view s) { return word_spans(s).size(); }

// Rough token estimate for texts that arrive without tokenizer metadata
// (~0.75 words per token for English prose).
inline long estimate_tokens(std::size_t words) {
    return static_cast<long>(std::ceil(static_cast<double>(words) / 0.75));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Lowercased words with ASCII punctuation removed; words that were pure
// punctuation vanish. Used by ROUGE-L and the fact filters. No stemming.
inline std::vector<std::string> normalize_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& w : word_spans(s)) {
        std::string tok;
        tok.reserve(w.end - w.begin);
        for (std::size_t i = w.begin; i < w.end; ++i) {
            const auto c = static_cast<unsigned char>(s[i]);
            if (c >= 0x80 || std::isalnum(c)) tok.push_back(static_cast<char>(std::tolower(c)));
        }
        if (!tok.empty()) out.push_back(std::move(tok));
    }
    return out;
}

inline std::string normalized_form(std::string_view s) {
    std::string out;
    for (auto& tok : normalize_tokens(s)) {
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

inline const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> kStop = {
        "a", "an", "the", "and", "or", "but", "nor", "so", "yet", "for",
        "of", "in", "on", "at", "to", "from", "by", "with", "about", "as",
        "into", "onto", "over", "under", "up", "down", "out", "off", "than",
        "is", "am", "are", "was", "were", "be", "been", "being",
        "do", "does", "did", "doing", "have", "has", "had", "having",
        "will", "would", "shall", "should", "can", "could", "may", "might",
        "must", "it", "its", "he", "his", "him", "she", "her", "hers",
        "they", "them", "their", "theirs", "we", "us", "our", "ours",
        "i", "me", "my", "mine", "you", "your", "yours",
        "this", "that", "these", "those", "there", "here",
        "who", "whom", "whose", "which", "what", "when", "where", "why", "how",
        "not", "no", "if", "then", "else", "while", "also", "too", "very",
        "s", "t", "d", "ll", "re", "ve", "m",
    };
    return kStop;
}

inline bool is_stopword(const std::string& normalized_token) {
    return stopwords().count(normalized_token) > 0;
}

inline bool has_content_word(std::string_view s) {
    for (auto& tok : normalize_tokens(s)) {
        if (!is_stopword(tok)) return true;
    }
    return false;
}

// N-grams over normalized tokens, each joined with a 0x1F separator so
// distinct token sequences cannot collide.
inline std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<std::string> out;
    if (n == 0 || tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string g = tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            g.push_back('\x1f');
            g += tokens[i + k];
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

// FNV-1a, used for content-addressed cache keys. Stable across platforms.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* kDigits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
        v >>= 4;
    }
    return out;
}

}  // namespace posfaith::text
