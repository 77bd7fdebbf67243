#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "posfaith/corpus.hpp"
#include "posfaith/errors.hpp"
#include "posfaith/segment.hpp"
#include "posfaith/text.hpp"

namespace posfaith {

// ROUGE-L F-measure between two texts. Tokens are lowercased words with
// punctuation stripped, no stemming. With LCS length l:
//   P = l/|hypothesis|, R = l/|premise|, F = 2PR/(P+R); 0 when l = 0.
inline double rouge_l(std::string_view premise, std::string_view hypothesis) {
    const std::vector<std::string> ref = text::normalize_tokens(premise);
    const std::vector<std::string> hyp = text::normalize_tokens(hypothesis);
    if (ref.empty() || hyp.empty()) return 0.0;

    // LCS over two rows.
    std::vector<std::size_t> prev(hyp.size() + 1, 0), cur(hyp.size() + 1, 0);
    for (std::size_t i = 1; i <= ref.size(); ++i) {
        for (std::size_t j = 1; j <= hyp.size(); ++j) {
            if (ref[i - 1] == hyp[j - 1]) cur[j] = prev[j - 1] + 1;
            else cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const auto lcs = static_cast<double>(prev[hyp.size()]);
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(hyp.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

// One scored atomic fact: the maximum backend score across source sentences
// and the index of the maximizing sentence (smallest index on ties).
struct FactScore {
    AtomicFact fact;
    double score = 0.0;
    int argmax_sentence = 0;
};

// A fact-vs-source scoring backend. Pairwise backends score
// (source sentence, fact) pairs in [0,1]; the human-label backend
// short-circuits the pairwise max with per-fact annotations.
class ScorerBackend {
public:
    virtual ~ScorerBackend() = default;
    virtual std::string kind() const = 0;
    virtual bool pairwise() const { return true; }
    virtual double score_pair(const std::string& premise, const std::string& hypothesis) const {
        (void)premise; (void)hypothesis;
        throw DataError(kind() + " backend does not score pairs");
    }
    // Facts scored concurrently per summary, capped at this many threads.
    virtual int max_concurrency() const { return 1; }
};

class RougeLBackend final : public ScorerBackend {
public:
    std::string kind() const override { return "rouge_l"; }
    double score_pair(const std::string& premise, const std::string& hypothesis) const override {
        return rouge_l(premise, hypothesis);
    }
    int max_concurrency() const override { return 8; }
};

// Per-fact true/false annotations loaded from a label JSONL file:
//   {"summary_id", "sentence_index", "fact_index", "label", "annotator"?}
// True maps to 1.0 and false to 0.0, exactly.
class HumanLabelBackend final : public ScorerBackend {
public:
    explicit HumanLabelBackend(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open label file: " + path);
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw DataError("label file line " + std::to_string(line_no) +
                                ": malformed JSON: " + e.what());
            }
            const Key key{j.at("summary_id").get<std::string>(),
                          j.at("sentence_index").get<int>(),
                          j.at("fact_index").get<int>()};
            labels_[key] = j.at("label").get<bool>();
        }
    }

    std::string kind() const override { return "human_labels"; }
    bool pairwise() const override { return false; }

    std::optional<bool> label_for(const AtomicFact& fact) const {
        const Key key{fact.summary_id, fact.sentence_index, fact.fact_index};
        auto it = labels_.find(key);
        if (it == labels_.end()) return std::nullopt;
        return it->second;
    }

    double score(const AtomicFact& fact) const {
        auto l = label_for(fact);
        if (!l)
            throw DataError("no label for fact " + fact.summary_id + "/s" +
                            std::to_string(fact.sentence_index) + "/f" +
                            std::to_string(fact.fact_index));
        return *l ? 1.0 : 0.0;
    }

    std::size_t size() const { return labels_.size(); }

private:
    using Key = std::tuple<std::string, int, int>;
    std::map<Key, bool> labels_;
};

// score(a_ij) = max over source sentences d_m of backend(d_m, a_ij), with the
// smallest maximizing sentence index on ties.
inline FactScore score_fact(const AtomicFact& fact, const Document& document,
                            const ScorerBackend& backend) {
    if (document.sentences.empty())
        throw DataError("document " + document.id + " has no sentences");
    FactScore result;
    result.fact = fact;
    result.score = -1.0;
    for (const auto& span : document.sentences) {
        const std::string premise(sentence_text(document.text, span));
        double s;
        try {
            s = backend.score_pair(premise, fact.text);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw ServiceError(backend.kind() + " backend failed on (document " +
                               document.id + " sentence " + std::to_string(span.index) +
                               ", fact \"" + fact.text + "\"): " + e.what());
        }
        if (s > result.score) {
            result.score = s;
            result.argmax_sentence = span.index;
        }
    }
    return result;
}

inline FactScore score_fact(const std::string& fact_text, const Document& document,
                            const ScorerBackend& backend) {
    AtomicFact fact;
    fact.text = fact_text;
    return score_fact(fact, document, backend);
}

// Faithfulness(s_i): arithmetic mean of the kept facts' scores.
inline double sentence_faithfulness(std::span<const double> scores) {
    if (scores.empty()) throw DataError("sentence has no kept facts");
    const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
    return sum / static_cast<double>(scores.size());
}

inline double sentence_faithfulness(const std::vector<double>& scores) {
    return sentence_faithfulness(std::span<const double>(scores));
}

// Share of facts at or above threshold, as a percentage.
inline double overall_faithfulness(std::span<const FactScore> scores, double threshold = 0.5) {
    if (scores.empty()) throw DataError("no fact scores to aggregate");
    std::size_t hits = 0;
    for (const auto& fs : scores)
        if (fs.score >= threshold) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

namespace detail {

// Runs fn(i) for i in [0, n) on up to max_threads threads. Results land by
// index, so the outcome is independent of scheduling.
template <typename Fn>
inline void indexed_parallel_for(std::size_t n, int max_threads, Fn&& fn) {
    if (n == 0) return;
    const int threads = std::max(1, std::min<int>(max_threads, static_cast<int>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// Scores every kept fact of a summary against the document, in
// (sentence_index, fact_index) order.
inline std::vector<FactScore> score_summary(const std::vector<AtomicFact>& facts,
                                            const Document& document,
                                            const ScorerBackend& backend) {
    std::vector<const AtomicFact*> kept;
    for (const auto& f : facts)
        if (f.kept) kept.push_back(&f);
    std::sort(kept.begin(), kept.end(), [](const AtomicFact* a, const AtomicFact* b) {
        return std::tie(a->sentence_index, a->fact_index) <
               std::tie(b->sentence_index, b->fact_index);
    });

    std::vector<FactScore> out(kept.size());
    if (backend.pairwise()) {
        detail::indexed_parallel_for(kept.size(), backend.max_concurrency(), [&](std::size_t i) {
            out[i] = score_fact(*kept[i], document, backend);
        });
    } else {
        const auto& labels = dynamic_cast<const HumanLabelBackend&>(backend);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            out[i].fact = *kept[i];
            out[i].score = labels.score(*kept[i]);
            out[i].argmax_sentence = 0;
        }
    }
    return out;
}

// --- scored-fact JSONL (fact fields inlined) --------------------------------

inline nlohmann::json fact_to_json(const AtomicFact& f) {
    return {{"summary_id", f.summary_id},
            {"sentence_index", f.sentence_index},
            {"fact_index", f.fact_index},
            {"fact", f.text},
            {"position_words", f.position_words},
            {"kept", f.kept}};
}

inline AtomicFact fact_from_json(const nlohmann::json& j) {
    AtomicFact f;
    f.summary_id = j.at("summary_id").get<std::string>();
    f.sentence_index = j.at("sentence_index").get<int>();
    f.fact_index = j.at("fact_index").get<int>();
    f.text = j.at("fact").get<std::string>();
    f.position_words = j.at("position_words").get<double>();
    f.kept = j.at("kept").get<bool>();
    return f;
}

inline nlohmann::json fact_score_to_json(const FactScore& fs) {
    nlohmann::json j = fact_to_json(fs.fact);
    j["score"] = fs.score;
    j["argmax_sentence"] = fs.argmax_sentence;
    return j;
}

inline FactScore fact_score_from_json(const nlohmann::json& j) {
    FactScore fs;
    fs.fact = fact_from_json(j);
    fs.score = j.at("score").get<double>();
    fs.argmax_sentence = j.at("argmax_sentence").get<int>();
    return fs;
}

}  // namespace posfaith
