#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "posfaith/errors.hpp"
#include "posfaith/llm_client.hpp"
#include "posfaith/scorers.hpp"
#include "posfaith/segment.hpp"
#include "posfaith/text.hpp"

namespace posfaith {

// A deterministic OpenAI-compatible chat-completions server for offline runs
// and tests. It recognizes the three prompts this library sends:
//   - summary prompts: answered with a leading extract of the source text
//     that lands inside the requested word range,
//   - fact decomposition prompts: answered with rule-based facts as a
//     bulleted list,
//   - merge prompts: answered by concatenating the two partial summaries and
//     deduplicating repeated sentences.
// Identical requests always produce identical responses.
class StubLlmServer {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 0;             // 0 binds an ephemeral port
        bool support_eta = false; // when false, eta requests get HTTP 400
    };

    StubLlmServer();
    explicit StubLlmServer(Options opts);

    ~StubLlmServer() { stop(); }

    void start() {
        if (opts_.port == 0) {
            port_ = server_.bind_to_any_port(opts_.host);
            if (port_ < 0) throw ServiceError("stub server: cannot bind a port");
            thread_ = std::thread([this] { server_.listen_after_bind(); });
        } else {
            port_ = opts_.port;
            if (!server_.bind_to_port(opts_.host, port_))
                throw ServiceError("stub server: cannot bind port " + std::to_string(port_));
            thread_ = std::thread([this] { server_.listen_after_bind(); });
        }
        server_.wait_until_ready();
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    int port() const { return port_; }
    std::string base_url() const { return "http://" + opts_.host + ":" + std::to_string(port_); }

    long request_count() const { return requests_.load(); }
    long completion_count() const { return completions_.load(); }
    long summary_calls() const { return summary_calls_.load(); }
    long fact_calls() const { return fact_calls_.load(); }
    long merge_calls() const { return merge_calls_.load(); }

    // The deterministic responders, exposed so tests can predict output.
    static std::string summarize_extractively(std::string_view source, long lower, long upper) {
        const auto spans = split_sentences(source);
        std::string out;
        long words = 0;
        for (const auto& span : spans) {
            const long sentence_words = span.word_length();
            if (words >= lower && words + sentence_words > upper) break;
            if (!out.empty()) out.push_back(' ');
            out += sentence_text(source, span);
            words += sentence_words;
            if (words >= upper) break;
        }
        if (out.empty() && !spans.empty()) out = std::string(sentence_text(source, spans.front()));
        return out;
    }

    static std::string decompose_as_list(std::string_view sentence) {
        std::string out;
        for (const auto& fact : decompose_facts_rule(sentence)) {
            out += "- ";
            out += fact;
            out.push_back('\n');
        }
        return out;
    }

    static std::string merge_summaries(std::string_view a, std::string_view b) {
        std::string combined(a);
        combined.push_back(' ');
        combined += b;
        const auto spans = split_sentences(combined);
        std::vector<std::string> seen;
        std::string out;
        for (const auto& span : spans) {
            std::string sentence(sentence_text(combined, span));
            const std::string norm = text::normalized_form(sentence);
            bool duplicate = false;
            for (const auto& s : seen)
                if (s == norm) { duplicate = true; break; }
            if (duplicate) continue;
            seen.push_back(norm);
            if (!out.empty()) out.push_back(' ');
            out += sentence;
        }
        return out;
    }

private:
    void handle_completion(const httplib::Request& req, httplib::Response& res) {
        requests_.fetch_add(1);
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", {{"message", e.what()}}}}.dump(),
                            "application/json");
            return;
        }
        if (body.contains("eta") && !opts_.support_eta) {
            res.status = 400;
            res.set_content(
                nlohmann::json{{"error", {{"message", "unsupported decoding parameter: eta"}}}}
                    .dump(),
                "application/json");
            return;
        }

        std::string prompt;
        if (body.contains("messages") && !body["messages"].empty())
            prompt = body["messages"].back().value("content", "");

        std::string reply;
        if (text::starts_with(prompt, kFactPromptPrefix)) {
            fact_calls_.fetch_add(1);
            reply = decompose_as_list(text::trim(prompt.substr(kFactPromptPrefix.size())));
        } else if (text::starts_with(prompt, "Combine the two partial summaries")) {
            merge_calls_.fetch_add(1);
            const auto [a, b] = split_merge_prompt(prompt);
            reply = merge_summaries(a, b);
        } else if (text::starts_with(prompt, "Write an accurate and engaging summary")) {
            summary_calls_.fetch_add(1);
            long lower = 100, upper = 200;
            parse_range(prompt, lower, upper);
            reply = summarize_extractively(source_text(prompt), lower, upper);
        } else {
            reply = "OK";
        }
        if (reply.empty()) reply = "No content.";

        completions_.fetch_add(1);
        const long prompt_tokens = text::estimate_tokens(text::word_count(prompt));
        const long completion_tokens = text::estimate_tokens(text::word_count(reply));
        nlohmann::json out{
            {"id", "stub-" + text::hex64(text::fnv1a64(prompt))},
            {"object", "chat.completion"},
            {"model", body.value("model", "stub")},
            {"choices", nlohmann::json::array({nlohmann::json{
                            {"index", 0},
                            {"message", {{"role", "assistant"}, {"content", reply}}},
                            {"finish_reason", "stop"}}})},
            {"usage", {{"prompt_tokens", prompt_tokens},
                       {"completion_tokens", completion_tokens},
                       {"total_tokens", prompt_tokens + completion_tokens}}}};
        res.set_content(out.dump(), "application/json");
    }

    static void parse_range(const std::string& prompt, long& lower, long& upper) {
        const std::string marker = "in range of ";
        const auto pos = prompt.find(marker);
        if (pos == std::string::npos) return;
        const char* p = prompt.c_str() + pos + marker.size();
        char* end = nullptr;
        const long lo = std::strtol(p, &end, 10);
        if (end == p) return;
        const std::string to = " to ";
        if (std::string(end).rfind(to, 0) != 0) return;
        const char* q = end + to.size();
        const long hi = std::strtol(q, &end, 10);
        if (end == q) return;
        lower = lo;
        upper = hi;
    }

    static std::string source_text(const std::string& prompt) {
        const std::string marker = "Text: ";
        const auto pos = prompt.find(marker);
        if (pos == std::string::npos) return prompt;
        return prompt.substr(pos + marker.size());
    }

    static std::pair<std::string, std::string> split_merge_prompt(const std::string& prompt) {
        const std::string a_marker = "Summary 1: ";
        const std::string b_marker = "\n\nSummary 2: ";
        const auto a_pos = prompt.find(a_marker);
        const auto b_pos = prompt.find(b_marker);
        if (a_pos == std::string::npos || b_pos == std::string::npos) return {prompt, ""};
        return {prompt.substr(a_pos + a_marker.size(), b_pos - a_pos - a_marker.size()),
                prompt.substr(b_pos + b_marker.size())};
    }

    Options opts_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<long> requests_{0};
    std::atomic<long> completions_{0};
    std::atomic<long> summary_calls_{0};
    std::atomic<long> fact_calls_{0};
    std::atomic<long> merge_calls_{0};
};

inline StubLlmServer::StubLlmServer(Options opts) : opts_(std::move(opts)) {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                     handle_completion(req, res);
                 });
    server_.Get("/__stats", [this](const httplib::Request&, httplib::Response& res) {
        nlohmann::json j{{"requests", requests_.load()},
                         {"completions", completions_.load()},
                         {"summary_calls", summary_calls_.load()},
                         {"fact_calls", fact_calls_.load()},
                         {"merge_calls", merge_calls_.load()}};
        res.set_content(j.dump(), "application/json");
    });
}

inline StubLlmServer::StubLlmServer() : StubLlmServer(Options()) {}

// A deterministic fact-check scorer stub speaking the http_factcheck wire
// contract, backed by ROUGE-L.
class StubScorerServer {
public:
    explicit StubScorerServer(std::string host = "127.0.0.1") : host_(std::move(host)) {
        server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
            requests_.fetch_add(1);
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception& e) {
                res.status = 400;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
                return;
            }
            if (body.at("premise").is_array()) {
                nlohmann::json scores = nlohmann::json::array();
                const auto& premises = body["premise"];
                const auto& hypotheses = body.at("hypothesis");
                for (std::size_t i = 0; i < premises.size(); ++i)
                    scores.push_back(rouge_l(premises[i].get<std::string>(),
                                             hypotheses[i].get<std::string>()));
                res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
            } else {
                const double s = rouge_l(body["premise"].get<std::string>(),
                                         body.at("hypothesis").get<std::string>());
                res.set_content(nlohmann::json{{"score", s}}.dump(), "application/json");
            }
        });
    }

    ~StubScorerServer() { stop(); }

    void start() {
        port_ = server_.bind_to_any_port(host_);
        if (port_ < 0) throw ServiceError("stub scorer: cannot bind a port");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }
    long request_count() const { return requests_.load(); }

private:
    std::string host_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<long> requests_{0};
};

}  // namespace posfaith
