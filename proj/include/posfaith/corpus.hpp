#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "posfaith/errors.hpp"
#include "posfaith/segment.hpp"
#include "posfaith/text.hpp"

namespace posfaith {

enum class Regime { standard, long_form };

inline std::string to_string(Regime r) { return r == Regime::standard ? "standard" : "long"; }

inline Regime regime_from_string(std::string_view s) {
    if (s == "standard") return Regime::standard;
    if (s == "long") return Regime::long_form;
    throw DataError("unknown regime: " + std::string(s));
}

enum class Provenance { generated, reference, external };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::generated: return "generated";
        case Provenance::reference: return "reference";
        default: return "external";
    }
}

inline Provenance provenance_from_string(std::string_view s) {
    if (s == "generated") return Provenance::generated;
    if (s == "reference") return Provenance::reference;
    if (s == "external") return Provenance::external;
    throw DataError("unknown provenance: " + std::string(s));
}

// Decoding strategy of a generation request. Fields irrelevant to the chosen
// strategy stay disengaged; greedy pins temperature to 0.
struct DecodingConfig {
    enum class Strategy { greedy, temperature_top_p, top_k, eta };

    Strategy strategy = Strategy::greedy;
    std::optional<double> temperature;
    std::optional<double> top_p;
    std::optional<int> top_k;
    std::optional<double> eta;

    static DecodingConfig greedy() {
        DecodingConfig c;
        c.strategy = Strategy::greedy;
        c.temperature = 0.0;
        return c;
    }
    static DecodingConfig sampled(double temperature, double top_p) {
        DecodingConfig c;
        c.strategy = Strategy::temperature_top_p;
        c.temperature = temperature;
        c.top_p = top_p;
        return c;
    }
    static DecodingConfig top_k_sampling(int k) {
        DecodingConfig c;
        c.strategy = Strategy::top_k;
        c.top_k = k;
        return c;
    }
    static DecodingConfig eta_sampling(double eta) {
        DecodingConfig c;
        c.strategy = Strategy::eta;
        c.eta = eta;
        return c;
    }

    std::string strategy_name() const {
        switch (strategy) {
            case Strategy::greedy: return "greedy";
            case Strategy::temperature_top_p: return "temperature_top_p";
            case Strategy::top_k: return "top_k";
            default: return "eta";
        }
    }

    // Short deterministic tag, used in summary ids and report group keys.
    std::string slug() const {
        char buf[64];
        switch (strategy) {
            case Strategy::greedy:
                return "greedy";
            case Strategy::temperature_top_p:
                std::snprintf(buf, sizeof(buf), "t%g_p%g", temperature.value_or(1.0), top_p.value_or(1.0));
                return buf;
            case Strategy::top_k:
                std::snprintf(buf, sizeof(buf), "topk%d", top_k.value_or(0));
                return buf;
            default:
                std::snprintf(buf, sizeof(buf), "eta%g", eta.value_or(0.0));
                return buf;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"strategy", strategy_name()}};
        if (temperature) j["temperature"] = *temperature;
        if (top_p) j["top_p"] = *top_p;
        if (top_k) j["top_k"] = *top_k;
        if (eta) j["eta"] = *eta;
        return j;
    }

    static DecodingConfig from_json(const nlohmann::json& j) {
        DecodingConfig c;
        const std::string s = j.at("strategy").get<std::string>();
        if (s == "greedy") c.strategy = Strategy::greedy;
        else if (s == "temperature_top_p") c.strategy = Strategy::temperature_top_p;
        else if (s == "top_k") c.strategy = Strategy::top_k;
        else if (s == "eta") c.strategy = Strategy::eta;
        else throw DataError("unknown decoding strategy: " + s);
        if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
        if (j.contains("top_p")) c.top_p = j["top_p"].get<double>();
        if (j.contains("top_k")) c.top_k = j["top_k"].get<int>();
        if (j.contains("eta")) c.eta = j["eta"].get<double>();
        return c;
    }

    bool operator==(const DecodingConfig& o) const {
        return strategy == o.strategy && temperature == o.temperature &&
               top_p == o.top_p && top_k == o.top_k && eta == o.eta;
    }
};

// A source document D = {d_1..d_M}.
struct Document {
    std::string id;
    std::string text;
    std::vector<SentenceSpan> sentences;
    long token_count = 0;
    std::map<std::string, std::string> meta;

    long word_count() const {
        return sentences.empty() ? static_cast<long>(text::word_count(text))
                                 : sentences.back().end_word;
    }
};

// A generated, reference, or externally supplied summary S = {s_1..s_n}.
struct SummaryRecord {
    std::string id;
    std::string document_id;
    std::string text;
    std::vector<SentenceSpan> sentences;
    long word_count = 0;
    Regime regime = Regime::standard;
    DecodingConfig decoding = DecodingConfig::greedy();
    Provenance provenance = Provenance::external;
    std::map<std::string, std::string> meta;
};

struct CorpusRecord {
    Document document;
    std::optional<SummaryRecord> summary;
};

// Builds a Document from raw text: sentence spans via split_sentences and
// token_count from meta["context_tokens"] when present, otherwise estimated
// from the word count.
inline Document make_document(std::string id, std::string doc_text,
                              std::map<std::string, std::string> meta = {}) {
    Document doc;
    doc.id = std::move(id);
    doc.text = std::move(doc_text);
    doc.sentences = split_sentences(doc.text);
    doc.meta = std::move(meta);
    if (auto it = doc.meta.find("context_tokens"); it != doc.meta.end())
        doc.token_count = std::stol(it->second);
    else
        doc.token_count = text::estimate_tokens(text::word_count(doc.text));
    return doc;
}

inline SummaryRecord make_summary_record(std::string id, std::string document_id,
                                         std::string summary_text, Regime regime,
                                         DecodingConfig decoding = DecodingConfig::greedy(),
                                         Provenance provenance = Provenance::external) {
    SummaryRecord rec;
    rec.id = std::move(id);
    rec.document_id = std::move(document_id);
    rec.text = std::move(summary_text);
    rec.sentences = split_sentences(rec.text);
    rec.word_count = static_cast<long>(text::word_count(rec.text));
    rec.regime = regime;
    rec.decoding = decoding;
    rec.provenance = provenance;
    return rec;
}

// Requested word range for long-regime prompts given the input context size:
// 20% to 25% of the context tokens, rounded to the nearest word.
struct WordRange {
    long lower = 0;
    long upper = 0;
};

inline WordRange words_range_for_context(long context_tokens) {
    if (context_tokens < 0) throw DataError("context_tokens must be >= 0");
    WordRange r;
    r.lower = std::lround(0.20 * static_cast<double>(context_tokens));
    r.upper = std::lround(0.25 * static_cast<double>(context_tokens));
    return r;
}

// True when the summary loops: a sentence repeated verbatim, or two distinct
// sentences whose normalized n-gram sets overlap by >= threshold of the
// smaller set.
inline bool detect_repetition(const SummaryRecord& summary, int ngram = 3,
                              double threshold = 0.8) {
    if (ngram < 1) throw DataError("ngram must be >= 1");
    const std::size_t n = summary.sentences.size();
    std::vector<std::string> raw(n);
    std::vector<std::vector<std::string>> grams(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw[i] = std::string(sentence_text(summary.text, summary.sentences[i]));
        grams[i] = text::ngrams(text::normalize_tokens(raw[i]),
                                static_cast<std::size_t>(ngram));
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::unordered_set<std::string> set_i(grams[i].begin(), grams[i].end());
        for (std::size_t j = i + 1; j < n; ++j) {
            if (raw[i] == raw[j]) return true;
            const std::size_t denom = std::min(set_i.size(),
                std::unordered_set<std::string>(grams[j].begin(), grams[j].end()).size());
            if (denom == 0) continue;
            std::size_t shared = 0;
            std::unordered_set<std::string> counted;
            for (const auto& g : grams[j])
                if (set_i.count(g) && counted.insert(g).second) ++shared;
            if (static_cast<double>(shared) / static_cast<double>(denom) >= threshold)
                return true;
        }
    }
    return false;
}

// Length matching: group summaries by sentence count and keep the group with
// the maximal count. Callers group inputs by (dataset, context bucket,
// regime) before calling.
inline std::vector<SummaryRecord> filter_length_matched(const std::vector<SummaryRecord>& summaries) {
    if (summaries.empty()) return {};
    std::size_t best = 0;
    for (const auto& s : summaries) best = std::max(best, s.sentences.size());
    std::vector<SummaryRecord> out;
    for (const auto& s : summaries)
        if (s.sentences.size() == best) out.push_back(s);
    return out;
}

namespace detail {

inline SummaryRecord summary_from_corpus_line(const nlohmann::json& j, const Document& doc,
                                              const std::string& field, Provenance prov) {
    Regime regime = Regime::standard;
    if (j.contains("meta") && j["meta"].contains("regime"))
        regime = regime_from_string(j["meta"]["regime"].get<std::string>());
    SummaryRecord rec = make_summary_record(doc.id + "/" + field, doc.id,
                                            j.at(field).get<std::string>(), regime,
                                            DecodingConfig::greedy(), prov);
    return rec;
}

}  // namespace detail

// Reads corpus JSONL: one object per line with fields
//   {"id", "document", "summary"?, "reference_summary"?, "meta"?}.
// Records come back in file order. When both summary fields are present the
// generated/external "summary" wins and the reference is ignored here.
inline std::vector<CorpusRecord> load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file: " + path);

    std::vector<CorpusRecord> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        for (const char* field : {"id", "document"})
            if (!j.contains(field))
                throw DataError("line " + std::to_string(line_no) + ": missing field " + field);

        const std::string id = j["id"].get<std::string>();
        if (!seen_ids.insert(id).second)
            throw DataError("line " + std::to_string(line_no) + ": duplicate id " + id);

        std::map<std::string, std::string> meta;
        if (j.contains("meta")) {
            for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it) {
                if (it.value().is_string()) meta[it.key()] = it.value().get<std::string>();
                else meta[it.key()] = it.value().dump();
            }
        }

        CorpusRecord rec;
        rec.document = make_document(id, j["document"].get<std::string>(), std::move(meta));
        if (j.contains("summary"))
            rec.summary = detail::summary_from_corpus_line(j, rec.document, "summary",
                                                           Provenance::external);
        else if (j.contains("reference_summary"))
            rec.summary = detail::summary_from_corpus_line(j, rec.document, "reference_summary",
                                                           Provenance::reference);
        records.push_back(std::move(rec));
    }
    return records;
}

// --- summary JSONL (the generate -> decompose handoff) ----------------------

inline nlohmann::json summary_to_json(const SummaryRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["document_id"] = rec.document_id;
    j["text"] = rec.text;
    j["word_count"] = rec.word_count;
    j["regime"] = to_string(rec.regime);
    j["decoding"] = rec.decoding.to_json();
    j["provenance"] = to_string(rec.provenance);
    if (!rec.meta.empty()) {
        nlohmann::json meta;
        for (const auto& [k, v] : rec.meta) meta[k] = v;
        j["meta"] = meta;
    }
    return j;
}

inline SummaryRecord summary_from_json(const nlohmann::json& j) {
    SummaryRecord rec = make_summary_record(
        j.at("id").get<std::string>(), j.at("document_id").get<std::string>(),
        j.at("text").get<std::string>(), regime_from_string(j.at("regime").get<std::string>()),
        DecodingConfig::from_json(j.at("decoding")),
        provenance_from_string(j.at("provenance").get<std::string>()));
    if (j.contains("meta"))
        for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it)
            rec.meta[it.key()] = it.value().get<std::string>();
    return rec;
}

inline std::vector<SummaryRecord> load_summaries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open summaries file: " + path);
    std::vector<SummaryRecord> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(summary_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("summaries line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline void save_summaries(const std::vector<SummaryRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write summaries file: " + path);
    for (const auto& rec : records) out << summary_to_json(rec).dump() << "\n";
}

// Writes records back to corpus JSONL. load_corpus(save_corpus(x)) == x on
// the data model.
inline void save_corpus(const std::vector<CorpusRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write corpus file: " + path);
    for (const auto& rec : records) {
        nlohmann::json j;
        j["id"] = rec.document.id;
        j["document"] = rec.document.text;
        if (rec.summary) {
            const char* field = rec.summary->provenance == Provenance::reference
                                    ? "reference_summary" : "summary";
            j[field] = rec.summary->text;
        }
        if (!rec.document.meta.empty()) {
            nlohmann::json meta;
            for (const auto& [k, v] : rec.document.meta) {
                if (k == "context_tokens") meta[k] = std::stol(v);
                else meta[k] = v;
            }
            j["meta"] = meta;
        }
        out << j.dump() << "\n";
    }
}

}  // namespace posfaith
