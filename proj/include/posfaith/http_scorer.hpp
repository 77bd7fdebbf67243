#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "posfaith/errors.hpp"
#include "posfaith/scorers.hpp"

namespace posfaith {

// Fact-check scoring over a minimal wire contract, so MiniCheck/NLI-style
// services stay swappable:
//   POST <path> {"premise": str, "hypothesis": str}   -> {"score": float}
//   POST <path> {"premise": [..], "hypothesis": [..]} -> {"scores": [float..]}
class HttpFactcheckBackend final : public ScorerBackend {
public:
    struct Options {
        std::string endpoint;          // e.g. "http://127.0.0.1:8090"
        std::string path = "/score";
        int retries = 3;
        int backoff_ms = 100;          // doubled per retry
        int timeout_s = 60;
        int concurrency = 4;
    };

    explicit HttpFactcheckBackend(Options opts) : opts_(std::move(opts)) {}

    std::string kind() const override { return "http_factcheck"; }
    int max_concurrency() const override { return opts_.concurrency; }

    double score_pair(const std::string& premise, const std::string& hypothesis) const override {
        const nlohmann::json body = post_json({{"premise", premise}, {"hypothesis", hypothesis}});
        if (!body.contains("score") || !body["score"].is_number())
            throw ServiceError("http_factcheck: response missing numeric \"score\"");
        return clamp_unit(body["score"].get<double>());
    }

    std::vector<double> score_batch(const std::vector<std::string>& premises,
                                    const std::vector<std::string>& hypotheses) const {
        if (premises.size() != hypotheses.size())
            throw DataError("score_batch: premise/hypothesis length mismatch");
        const nlohmann::json body = post_json({{"premise", premises}, {"hypothesis", hypotheses}});
        if (!body.contains("scores") || !body["scores"].is_array())
            throw ServiceError("http_factcheck: response missing \"scores\" array");
        std::vector<double> out;
        for (const auto& v : body["scores"]) out.push_back(clamp_unit(v.get<double>()));
        if (out.size() != premises.size())
            throw ServiceError("http_factcheck: scores array length mismatch");
        return out;
    }

private:
    static double clamp_unit(double v) { return std::min(1.0, std::max(0.0, v)); }

    nlohmann::json post_json(const nlohmann::json& payload) const {
        int delay = opts_.backoff_ms;
        int last_status = 0;
        std::string last_error = "connection failed";
        for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
                delay *= 2;
            }
            httplib::Client cli(opts_.endpoint);
            cli.set_read_timeout(opts_.timeout_s, 0);
            auto res = cli.Post(opts_.path, payload.dump(), "application/json");
            if (!res) {
                last_status = 0;
                last_error = httplib::to_string(res.error());
                continue;
            }
            last_status = res->status;
            if (res->status >= 200 && res->status < 300) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception& e) {
                    throw ServiceError(std::string("http_factcheck: unparseable response: ") +
                                       e.what(), res->status);
                }
            }
            if (res->status >= 400 && res->status < 500)
                throw ServiceError("http_factcheck: HTTP " + std::to_string(res->status) +
                                   ": " + res->body, res->status);
            last_error = "HTTP " + std::to_string(res->status);
        }
        throw ServiceError("http_factcheck: giving up after " + std::to_string(opts_.retries + 1) +
                           " attempts: " + last_error, last_status);
    }

    Options opts_;
};

}  // namespace posfaith
