#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "posfaith/corpus.hpp"
#include "posfaith/errors.hpp"
#include "posfaith/segment.hpp"
#include "posfaith/text.hpp"

namespace posfaith {

// Prompt templates. words_range renders as "<lower> to <upper>".
inline std::string build_summary_prompt(std::string_view document_text, const WordRange& range) {
    std::string prompt = "Write an accurate and engaging summary for the given text in range of ";
    prompt += std::to_string(range.lower) + " to " + std::to_string(range.upper);
    prompt += " words using only the provided passage (might be irrelevant).\n\n"
              "Use an unbiased and journalistic tone.\n\nText: ";
    prompt += document_text;
    return prompt;
}

inline constexpr std::string_view kFactPromptPrefix = "Decompose the text into atomic facts.";

inline std::string build_fact_prompt(std::string_view sentence) {
    std::string prompt(kFactPromptPrefix);
    prompt += "\n\n";
    prompt += sentence;
    return prompt;
}

inline constexpr std::string_view kMergePromptPrefix =
    "Combine the two partial summaries into one coherent summary, preserving all facts.";

inline std::string build_merge_prompt(std::string_view merge_instruction, std::string_view a,
                                      std::string_view b) {
    std::string prompt(merge_instruction);
    prompt += "\n\nSummary 1: ";
    prompt += a;
    prompt += "\n\nSummary 2: ";
    prompt += b;
    return prompt;
}

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total_tokens = 0;
};

// A fully specified completion request. cache_key() is a pure function of
// the fields, so identical requests are identical cache entries.
struct GenerationRequest {
    std::string model;
    std::string prompt;
    DecodingConfig decoding;
    long max_tokens = 0;

    std::string cache_key() const {
        std::string canonical = model;
        canonical.push_back('\x1f');
        canonical += prompt;
        canonical.push_back('\x1f');
        canonical += decoding.to_json().dump();
        canonical.push_back('\x1f');
        canonical += std::to_string(max_tokens);
        return text::hex64(text::fnv1a64(canonical));
    }
};

struct LlmResponse {
    std::string text;
    TokenUsage usage;
    bool from_cache = false;
};

namespace detail {

inline std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

// On-disk response cache: one JSON file per entry, keyed by content hash,
// written via atomic rename so partial runs never leave torn entries.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::string dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }

    bool enabled() const { return !dir_.empty(); }

    std::optional<LlmResponse> get(const std::string& key) const {
        if (!enabled()) return std::nullopt;
        std::ifstream in(entry_path(key), std::ios::binary);
        if (!in) return std::nullopt;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;  // torn or foreign file; treat as a miss
        }
        LlmResponse resp;
        resp.text = j.at("response_text").get<std::string>();
        if (j.contains("usage")) {
            resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
            resp.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
            resp.usage.total_tokens = j["usage"].value("total_tokens", 0L);
        }
        resp.from_cache = true;
        return resp;
    }

    void put(const std::string& key, const GenerationRequest& request,
             const LlmResponse& response) const {
        if (!enabled()) return;
        nlohmann::json j;
        j["cache_key"] = key;
        j["response_text"] = response.text;
        j["created_at"] = detail::iso8601_now();
        j["usage"] = {{"prompt_tokens", response.usage.prompt_tokens},
                      {"completion_tokens", response.usage.completion_tokens},
                      {"total_tokens", response.usage.total_tokens}};
        j["request"] = {{"model", request.model},
                        {"prompt", request.prompt},
                        {"decoding", request.decoding.to_json()},
                        {"max_tokens", request.max_tokens}};
        const auto final_path = entry_path(key);
        const auto tmp_path = final_path.string() + ".tmp" + std::to_string(::getpid());
        {
            std::ofstream out(tmp_path, std::ios::binary);
            out << j.dump(2) << "\n";
        }
        std::filesystem::rename(tmp_path, final_path);
    }

private:
    std::filesystem::path entry_path(const std::string& key) const {
        return std::filesystem::path(dir_) / (key + ".json");
    }

    std::string dir_;
};

// OpenAI-compatible chat-completions client with retries, backoff, and the
// content-addressed cache. Decoding parameters map onto temperature / top_p /
// top_k; eta travels as an extension field and servers that reject it get
// surfaced as an unsupported-parameter error, not retried.
class LlmClient {
public:
    struct Config {
        std::string endpoint;                // "http://host:port"
        std::string model = "stub";
        std::string cache_dir;               // empty disables the cache
        std::string api_path = "/v1/chat/completions";
        long max_tokens = 4096;
        int concurrency = 4;                 // bounded in-flight requests
        int retries = 3;
        int backoff_ms = 100;                // doubled per retry
        int timeout_s = 120;
    };

    explicit LlmClient(Config config) : config_(std::move(config)), cache_(config_.cache_dir) {
        if (const char* key = std::getenv("POSFAITH_API_KEY")) api_key_ = key;
    }

    const Config& config() const { return config_; }
    long network_calls() const { return network_calls_.load(); }
    long cache_hits() const { return cache_hits_.load(); }

    GenerationRequest make_request(std::string prompt, const DecodingConfig& decoding) const {
        GenerationRequest req;
        req.model = config_.model;
        req.prompt = std::move(prompt);
        req.decoding = decoding;
        req.max_tokens = config_.max_tokens;
        return req;
    }

    LlmResponse complete(const GenerationRequest& request) {
        const std::string key = request.cache_key();
        if (auto cached = cache_.get(key)) {
            cache_hits_.fetch_add(1);
            return *cached;
        }
        LlmResponse resp = complete_uncached(request);
        cache_.put(key, request, resp);
        return resp;
    }

private:
    LlmResponse complete_uncached(const GenerationRequest& request) {
        nlohmann::json body;
        body["model"] = request.model;
        body["messages"] = nlohmann::json::array({
            nlohmann::json{{"role", "user"}, {"content", request.prompt}},
        });
        body["max_tokens"] = request.max_tokens;
        const auto& d = request.decoding;
        switch (d.strategy) {
            case DecodingConfig::Strategy::greedy:
                body["temperature"] = 0.0;
                break;
            case DecodingConfig::Strategy::temperature_top_p:
                body["temperature"] = d.temperature.value_or(1.0);
                body["top_p"] = d.top_p.value_or(1.0);
                break;
            case DecodingConfig::Strategy::top_k:
                body["top_k"] = d.top_k.value_or(1);
                if (d.temperature) body["temperature"] = *d.temperature;
                break;
            case DecodingConfig::Strategy::eta:
                body["eta"] = d.eta.value_or(0.0);  // extension field
                break;
        }

        int delay = config_.backoff_ms;
        int last_status = 0;
        std::string last_error = "connection failed";
        for (int attempt = 0; attempt <= config_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
                delay *= 2;
            }
            httplib::Client cli(config_.endpoint);
            cli.set_read_timeout(config_.timeout_s, 0);
            cli.set_connection_timeout(10, 0);
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
            network_calls_.fetch_add(1);
            auto res = cli.Post(config_.api_path, headers, body.dump(), "application/json");
            if (!res) {
                last_status = 0;
                last_error = httplib::to_string(res.error());
                continue;
            }
            last_status = res->status;
            if (res->status >= 200 && res->status < 300) return parse_completion(res->body);
            if (res->status >= 400 && res->status < 500) {
                const std::string message = extract_error(res->body);
                if (message.find("unsupported") != std::string::npos)
                    throw ServiceError(message, res->status);  // capability, not transport
                throw ServiceError("chat completion rejected (HTTP " +
                                   std::to_string(res->status) + "): " + message, res->status);
            }
            last_error = "HTTP " + std::to_string(res->status);
        }
        throw ServiceError("chat completion failed after " + std::to_string(config_.retries + 1) +
                           " attempts: " + last_error, last_status);
    }

    static std::string extract_error(const std::string& body) {
        try {
            const auto j = nlohmann::json::parse(body);
            if (j.contains("error")) {
                if (j["error"].is_object() && j["error"].contains("message"))
                    return j["error"]["message"].get<std::string>();
                if (j["error"].is_string()) return j["error"].get<std::string>();
            }
        } catch (const nlohmann::json::exception&) {
        }
        return body;
    }

    static LlmResponse parse_completion(const std::string& body) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ServiceError(std::string("unparseable completion response: ") + e.what());
        }
        LlmResponse resp;
        try {
            resp.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ServiceError(std::string("completion response missing choices: ") + e.what());
        }
        if (j.contains("usage")) {
            resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
            resp.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
            resp.usage.total_tokens = j["usage"].value("total_tokens", 0L);
        }
        return resp;
    }

    Config config_;
    ResponseCache cache_;
    std::string api_key_;
    std::atomic<long> network_calls_{0};
    std::atomic<long> cache_hits_{0};
};

// Generates one summary for a document. Standard regime requests 100-200
// words; long regime derives the range from the document's context tokens.
inline SummaryRecord generate_summary(const Document& document, Regime regime,
                                      const DecodingConfig& decoding, LlmClient& client) {
    WordRange range{100, 200};
    if (regime == Regime::long_form) {
        if (document.token_count < 1)
            throw DataError("long regime requires document token_count");
        range = words_range_for_context(document.token_count);
    }
    const GenerationRequest req =
        client.make_request(build_summary_prompt(document.text, range), decoding);
    const LlmResponse resp = client.complete(req);
    if (text::trim(resp.text).empty())
        throw ServiceError("empty completion for document " + document.id);

    SummaryRecord rec = make_summary_record(
        document.id + "/" + to_string(regime) + "/" + decoding.slug(), document.id,
        text::trim(resp.text), regime, decoding, Provenance::generated);
    rec.meta["model"] = client.config().model;
    rec.meta["cache_key"] = req.cache_key();
    if (auto it = document.meta.find("dataset"); it != document.meta.end())
        rec.meta["dataset"] = it->second;
    rec.meta["context_tokens"] = std::to_string(document.token_count);
    return rec;
}

// LLM-backed atomic fact decomposition for one sentence. Parses one fact per
// response line; an unparseable (empty) response falls back to the rule-based
// splitter and notes the fallback via the optional warning sink.
template <typename WarnFn>
inline std::vector<std::string> decompose_facts_llm(const std::string& sentence,
                                                    LlmClient& client, WarnFn&& warn) {
    if (text::trim(sentence).empty()) throw DataError("cannot decompose an empty sentence");
    const GenerationRequest req =
        client.make_request(build_fact_prompt(sentence), DecodingConfig::greedy());
    const LlmResponse resp = client.complete(req);
    std::vector<std::string> facts = parse_fact_lines(resp.text);
    if (facts.empty()) {
        warn("fact decomposition returned no parseable facts; using rule-based fallback");
        facts = decompose_facts_rule(sentence);
    }
    return facts;
}

inline std::vector<std::string> decompose_facts_llm(const std::string& sentence,
                                                    LlmClient& client) {
    return decompose_facts_llm(sentence, client, [](std::string_view) {});
}

// Decomposes every sentence of a summary, running up to
// client.config().concurrency sentences in flight. Facts are emitted in
// (sentence_index, fact_index) order regardless of completion order.
inline std::vector<AtomicFact> decompose_summary_llm(const SummaryRecord& summary,
                                                     LlmClient& client) {
    const std::size_t n = summary.sentences.size();
    std::vector<std::vector<std::string>> per_sentence(n);
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    const int threads =
        std::max(1, std::min<int>(client.config().concurrency, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    const std::string sent(sentence_text(summary.text, summary.sentences[i]));
                    per_sentence[i] = decompose_facts_llm(sent, client);
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

    std::vector<AtomicFact> facts;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& span = summary.sentences[i];
        int j = 0;
        for (auto& fact_text : per_sentence[i]) {
            AtomicFact fact;
            fact.summary_id = summary.id;
            fact.sentence_index = span.index;
            fact.fact_index = j++;
            fact.text = std::move(fact_text);
            fact.position_words = span.midpoint_words();
            facts.push_back(std::move(fact));
        }
    }
    return facts;
}

struct SweepFailure {
    std::string document_id;
    DecodingConfig decoding;
    std::string message;
};

struct SweepResult {
    std::vector<SummaryRecord> records;
    std::vector<SweepFailure> failures;
};

// Cartesian product of documents x decoding configs, generated in
// deterministic document-major order. Failed cells are recorded and the
// sweep continues.
inline SweepResult sweep(const std::vector<Document>& documents,
                         const std::vector<DecodingConfig>& grid, Regime regime,
                         LlmClient& client) {
    if (grid.empty()) throw DataError("decoding sweep grid is empty");
    SweepResult result;
    for (const auto& doc : documents) {
        for (const auto& config : grid) {
            try {
                result.records.push_back(generate_summary(doc, regime, config, client));
            } catch (const Error& e) {
                result.failures.push_back({doc.id, config, e.what()});
            }
        }
    }
    return result;
}

namespace detail {

struct Chunk {
    std::string text;
    long words = 0;
    bool oversized = false;  // a single sentence alone exceeded the budget
};

inline std::vector<Chunk> plan_chunks(const Document& document, long chunk_tokens) {
    std::vector<Chunk> chunks;
    Chunk current;
    auto flush = [&] {
        if (!current.text.empty()) {
            chunks.push_back(std::move(current));
            current = {};
        }
    };
    for (const auto& span : document.sentences) {
        const std::string sent(sentence_text(document.text, span));
        const long sent_words = span.word_length();
        if (current.words > 0 &&
            text::estimate_tokens(static_cast<std::size_t>(current.words + sent_words)) >
                chunk_tokens)
            flush();
        if (current.words == 0 &&
            text::estimate_tokens(static_cast<std::size_t>(sent_words)) > chunk_tokens) {
            chunks.push_back({sent, sent_words, true});
            continue;
        }
        if (!current.text.empty()) current.text.push_back(' ');
        current.text += sent;
        current.words += sent_words;
    }
    flush();
    return chunks;
}

}  // namespace detail

// Chunked summarization: split the document at sentence boundaries into
// chunks of at most chunk_tokens (estimated), summarize each chunk with the
// standard prompt, then merge partial summaries pairwise (fan-in 2, balanced)
// until one remains. The merge tree lands in the record's meta.
inline SummaryRecord chunked_summarize(const Document& document, long chunk_tokens,
                                       LlmClient& client,
                                       const DecodingConfig& decoding = DecodingConfig::greedy(),
                                       std::string_view merge_instruction = kMergePromptPrefix) {
    if (chunk_tokens < 256) throw DataError("chunk_tokens must be >= 256");
    if (document.sentences.empty()) throw DataError("document " + document.id + " is empty");

    const std::vector<detail::Chunk> chunks = detail::plan_chunks(document, chunk_tokens);
    const WordRange standard_range{100, 200};

    std::vector<std::string> level;
    std::vector<std::string> labels;
    long oversized = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (chunks[i].oversized) ++oversized;
        const GenerationRequest req =
            client.make_request(build_summary_prompt(chunks[i].text, standard_range), decoding);
        try {
            std::string leaf = text::trim(client.complete(req).text);
            if (leaf.empty()) throw ServiceError("empty completion");
            level.push_back(std::move(leaf));
        } catch (const Error& e) {
            throw ServiceError("chunk " + std::to_string(i) + " failed: " + e.what());
        }
        labels.push_back(std::to_string(i));
    }

    long merges = 0;
    while (level.size() > 1) {
        std::vector<std::string> next_level;
        std::vector<std::string> next_labels;
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            const GenerationRequest req = client.make_request(
                build_merge_prompt(merge_instruction, level[i], level[i + 1]), decoding);
            try {
                std::string merged = text::trim(client.complete(req).text);
                if (merged.empty()) throw ServiceError("empty completion");
                next_level.push_back(std::move(merged));
            } catch (const Error& e) {
                throw ServiceError("merge (" + labels[i] + "+" + labels[i + 1] +
                                   ") failed: " + e.what());
            }
            next_labels.push_back("(" + labels[i] + "+" + labels[i + 1] + ")");
            ++merges;
        }
        if (level.size() % 2 == 1) {
            next_level.push_back(level.back());
            next_labels.push_back(labels.back());
        }
        level = std::move(next_level);
        labels = std::move(next_labels);
    }

    SummaryRecord rec = make_summary_record(document.id + "/chunked/" + decoding.slug(),
                                            document.id, level.front(), Regime::long_form,
                                            decoding, Provenance::generated);
    rec.meta["model"] = client.config().model;
    rec.meta["chunk_count"] = std::to_string(chunks.size());
    rec.meta["merge_count"] = std::to_string(merges);
    rec.meta["chunk_tree"] = labels.front();
    if (oversized > 0) rec.meta["oversized_chunks"] = std::to_string(oversized);
    if (auto it = document.meta.find("dataset"); it != document.meta.end())
        rec.meta["dataset"] = it->second;
    return rec;
}

}  // namespace posfaith
