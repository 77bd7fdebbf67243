// Standalone deterministic stub LLM server, OpenAI-compatible. Lets the
// pipeline run fully offline:
//   posfaith-stub-llm --port 8008 &
//   posfaith pipeline --input corpus.jsonl --out out/ --endpoint http://127.0.0.1:8008

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "posfaith/stub_llm.hpp"

namespace {
std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic stub chat-completions server"};
    posfaith::StubLlmServer::Options opts;
    app.add_option("--host", opts.host, "bind address");
    app.add_option("--port", opts.port, "port (0 picks one)");
    app.add_flag("--support-eta", opts.support_eta, "accept eta-sampling requests");
    CLI11_PARSE(app, argc, argv);

    posfaith::StubLlmServer server(opts);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    try {
        server.start();
    } catch (const std::exception& e) {
        std::cerr << "failed to start: " << e.what() << "\n";
        return 1;
    }
    std::cout << "stub LLM server listening on " << server.base_url() << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    server.stop();
    return 0;
}
