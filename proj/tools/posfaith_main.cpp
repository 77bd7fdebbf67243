// posfaith: positional faithfulness analysis for long generated summaries.
//
// Subcommands cover the full pipeline: ingest -> generate -> decompose ->
// score -> profile -> report, plus attention profiling and agreement
// statistics. `posfaith pipeline` runs the whole chain into one directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posfaith/attention.hpp"
#include "posfaith/corpus.hpp"
#include "posfaith/errors.hpp"
#include "posfaith/http_scorer.hpp"
#include "posfaith/llm_client.hpp"
#include "posfaith/positional.hpp"
#include "posfaith/report.hpp"
#include "posfaith/scorers.hpp"
#include "posfaith/segment.hpp"

namespace {

using namespace posfaith;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// shared option bundles

struct LlmFlags {
    std::string endpoint = "http://127.0.0.1:8008";
    std::string model = "stub";
    std::string cache_dir;
    long max_tokens = 4096;
    int concurrency = 4;

    LlmClient::Config to_config() const {
        LlmClient::Config config;
        config.endpoint = endpoint;
        config.model = model;
        config.cache_dir = cache_dir;
        config.max_tokens = max_tokens;
        config.concurrency = concurrency;
        return config;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--endpoint", endpoint, "chat-completions endpoint (http://host:port)");
        cmd->add_option("--model", model, "model name sent with each request");
        cmd->add_option("--cache-dir", cache_dir, "response cache directory (empty disables)");
        cmd->add_option("--max-tokens", max_tokens, "max_tokens per request");
        cmd->add_option("--concurrency", concurrency, "bounded in-flight request limit")
            ->check(CLI::PositiveNumber);
    }
};

struct DecodingFlags {
    std::string strategy = "greedy";
    double temperature = 0.7;
    double top_p = 0.9;
    int top_k = 20;
    double eta = 6e-4;

    DecodingConfig to_config() const {
        if (strategy == "greedy") return DecodingConfig::greedy();
        if (strategy == "temperature_top_p") return DecodingConfig::sampled(temperature, top_p);
        if (strategy == "top_k") return DecodingConfig::top_k_sampling(top_k);
        if (strategy == "eta") return DecodingConfig::eta_sampling(eta);
        throw DataError("unknown decoding strategy: " + strategy);
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--strategy", strategy, "decoding strategy")
            ->check(CLI::IsMember({"greedy", "temperature_top_p", "top_k", "eta"}));
        cmd->add_option("--temperature", temperature, "sampling temperature");
        cmd->add_option("--top-p", top_p, "nucleus sampling threshold");
        cmd->add_option("--top-k", top_k, "top-k candidate count");
        cmd->add_option("--eta", eta, "eta-sampling threshold");
    }
};

struct GlobalFlags {
    int bins = 5;
    std::string coordinate = "words";
    std::string bin_mode = "fixed";
    std::string scorer = "rouge";
    std::string format = "md";
};

// ---------------------------------------------------------------------------
// JSONL helpers

std::vector<AtomicFact> load_facts_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open facts file: " + path);
    std::vector<AtomicFact> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(fact_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("facts line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_facts_file(const std::vector<AtomicFact>& facts, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write facts file: " + path);
    for (const auto& f : facts) out << fact_to_json(f).dump() << "\n";
}

std::vector<FactScore> load_scored_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open scored-facts file: " + path);
    std::vector<FactScore> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(fact_score_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("scored-facts line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_scored_file(const std::vector<FactScore>& scores, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write scored-facts file: " + path);
    for (const auto& fs : scores) out << fact_score_to_json(fs).dump() << "\n";
}

using LabelKey = std::tuple<std::string, int, int>;

std::map<LabelKey, bool> load_labels_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open label file: " + path);
    std::map<LabelKey, bool> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out[{j.at("summary_id").get<std::string>(), j.at("sentence_index").get<int>(),
                 j.at("fact_index").get<int>()}] = j.at("label").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("label file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// pipeline stages shared between the individual subcommands and `pipeline`

std::unique_ptr<ScorerBackend> make_backend(const GlobalFlags& globals,
                                            const std::string& scorer_endpoint,
                                            const std::string& labels_path) {
    if (globals.scorer == "rouge") return std::make_unique<RougeLBackend>();
    if (globals.scorer == "http") {
        HttpFactcheckBackend::Options opts;
        opts.endpoint = scorer_endpoint;
        return std::make_unique<HttpFactcheckBackend>(opts);
    }
    if (globals.scorer == "labels") {
        if (labels_path.empty()) throw DataError("--scorer labels requires --labels <file>");
        return std::make_unique<HumanLabelBackend>(labels_path);
    }
    throw DataError("unknown scorer: " + globals.scorer);
}

std::vector<SummaryRecord> generate_stage(const std::vector<CorpusRecord>& corpus,
                                          LlmClient& client,
                                          const std::optional<Regime>& regime_override,
                                          const DecodingConfig& decoding) {
    std::vector<SummaryRecord> records;
    for (const auto& rec : corpus) {
        Regime regime = Regime::standard;
        if (regime_override) regime = *regime_override;
        else if (auto it = rec.document.meta.find("regime"); it != rec.document.meta.end())
            regime = regime_from_string(it->second);
        records.push_back(generate_summary(rec.document, regime, decoding, client));
    }
    return records;
}

std::vector<AtomicFact> decompose_stage(const std::vector<SummaryRecord>& summaries,
                                        LlmClient* client, const FactFilterOptions& filter_opts) {
    std::vector<AtomicFact> all;
    for (const auto& summary : summaries) {
        std::vector<AtomicFact> facts;
        if (client) {
            facts = decompose_summary_llm(summary, *client);
        } else {
            facts = decompose_summary(summary.id, summary.text, summary.sentences,
                                      [](const std::string& s) { return decompose_facts_rule(s); });
        }
        for (auto& f : filter_facts(std::move(facts), filter_opts)) all.push_back(std::move(f));
    }
    return all;
}

std::vector<FactScore> score_stage(const std::vector<AtomicFact>& facts,
                                   const std::vector<CorpusRecord>& corpus,
                                   const std::vector<SummaryRecord>& summaries,
                                   const ScorerBackend& backend) {
    std::map<std::string, const Document*> docs;
    for (const auto& rec : corpus) docs[rec.document.id] = &rec.document;
    std::map<std::string, std::string> summary_to_doc;
    for (const auto& s : summaries) summary_to_doc[s.id] = s.document_id;

    std::map<std::string, std::vector<AtomicFact>> by_summary;
    for (const auto& f : facts) by_summary[f.summary_id].push_back(f);

    std::vector<FactScore> all;
    for (const auto& [summary_id, summary_facts] : by_summary) {
        auto doc_it = summary_to_doc.find(summary_id);
        if (doc_it == summary_to_doc.end())
            throw DataError("facts reference unknown summary " + summary_id);
        auto doc = docs.find(doc_it->second);
        if (doc == docs.end())
            throw DataError("summary " + summary_id + " references unknown document " +
                            doc_it->second);
        for (auto& fs : score_summary(summary_facts, *doc->second, backend))
            all.push_back(std::move(fs));
    }
    return all;
}

struct ProfileOutputs {
    std::string jsonl;
    std::string csv;
    std::vector<SummaryProfile> profiles;
};

ProfileOutputs profile_stage(const std::vector<FactScore>& scored,
                             const std::vector<SummaryRecord>& summaries,
                             const GlobalFlags& globals) {
    const CoordinateMode coordinate = coordinate_from_string(globals.coordinate);
    const BinMode mode = bin_mode_from_string(globals.bin_mode);

    std::map<std::string, const SummaryRecord*> by_id;
    for (const auto& s : summaries) by_id[s.id] = &s;
    std::map<std::string, std::vector<const FactScore*>> grouped;
    for (const auto& fs : scored) grouped[fs.fact.summary_id].push_back(&fs);

    ProfileOutputs out;
    out.csv = "summary_id,bin_count";
    for (int b = 1; b <= globals.bins; ++b) out.csv += ",mean_" + std::to_string(b);
    for (int b = 1; b <= globals.bins; ++b) out.csv += ",count_" + std::to_string(b);
    out.csv += ",sensitivity\n";

    for (const auto& [summary_id, entries] : grouped) {
        auto it = by_id.find(summary_id);
        if (it == by_id.end())
            throw DataError("scored facts reference unknown summary " + summary_id);
        const SummaryRecord& summary = *it->second;

        std::vector<AtomicFact> kept_facts;
        std::vector<double> scores;
        for (const auto* fs : entries) {
            kept_facts.push_back(fs->fact);
            scores.push_back(fs->score);
        }
        const PositionSet positions =
            fact_positions(kept_facts, summary.word_count,
                           static_cast<long>(summary.sentences.size()), coordinate);
        const BinAssignment assignment =
            assign_bins(positions.positions, positions.domain_width, globals.bins, mode);
        const SensitivityReport report = sensitivity(bin_profile(scores, assignment));

        out.jsonl += bin_report_json(summary_id, report).dump() + "\n";

        out.csv += summary_id + "," + std::to_string(globals.bins);
        for (const auto& m : report.profile.means)
            out.csv += m ? "," + detail::fixed2(*m) : ",";
        for (const long c : report.profile.counts) out.csv += "," + std::to_string(c);
        out.csv += report.defined ? "," + detail::fixed2(report.sensitivity) + "\n" : ",\n";

        SummaryProfile profile;
        profile.summary_id = summary_id;
        profile.group = GroupKey::for_summary(summary);
        profile.profile = report.profile;
        out.profiles.push_back(std::move(profile));
    }
    return out;
}

// ---------------------------------------------------------------------------
// subcommand runners

void run_ingest(const std::string& input, const std::string& output) {
    const auto records = load_corpus(input);
    long with_summary = 0;
    for (const auto& r : records)
        if (r.summary) ++with_summary;
    if (!output.empty()) save_corpus(records, output);
    std::cout << "ingested " << records.size() << " documents (" << with_summary
              << " with summaries) from " << input << "\n";
}

void run_agree(const std::string& path_a, const std::string& path_b) {
    const auto labels_a = load_labels_file(path_a);
    const auto labels_b = load_labels_file(path_b);
    if (labels_a.size() != labels_b.size())
        throw DataError("label files disagree on item count (" +
                        std::to_string(labels_a.size()) + " vs " +
                        std::to_string(labels_b.size()) + ")");
    std::vector<bool> a, b;
    for (const auto& [key, label] : labels_a) {
        auto it = labels_b.find(key);
        if (it == labels_b.end())
            throw DataError("label files disagree on item set: missing " + std::get<0>(key) +
                            "/s" + std::to_string(std::get<1>(key)) + "/f" +
                            std::to_string(std::get<2>(key)));
        a.push_back(label);
        b.push_back(it->second);
    }
    const double agreement = raw_agreement(a, b);
    std::printf("raw_agreement: %.1f%% (%zu items)\n", agreement, a.size());
}

void run_attention(const std::string& bundle, const std::string& output,
                   const std::string& orientation) {
    const AttentionMatrix matrix = load_attention(bundle);
    const auto spans = load_token_spans(bundle);
    const TargetSentences targets = select_targets(spans);
    const auto rows =
        attention_profile(matrix, targets, orientation_from_string(orientation));
    const std::string csv = attention_profile_csv(rows);
    if (output.empty()) std::cout << csv;
    else write_text_file(output, csv);
    std::cerr << "profiled " << rows.size() << " blocks over " << matrix.seq_len << " tokens\n";
}

void run_pipeline(const std::string& input, const std::string& out_dir, LlmFlags llm,
                  const std::optional<Regime>& regime_override, const DecodingConfig& decoding,
                  const GlobalFlags& globals, const std::string& scorer_endpoint,
                  const std::string& labels_path, bool rule_decompose) {
    fs::create_directories(out_dir);
    if (llm.cache_dir.empty()) llm.cache_dir = (fs::path(out_dir) / "cache").string();
    LlmClient client(llm.to_config());

    const auto corpus = load_corpus(input);
    std::cerr << "pipeline: " << corpus.size() << " documents\n";

    const auto summaries = generate_stage(corpus, client, regime_override, decoding);
    save_summaries(summaries, (fs::path(out_dir) / "summaries.jsonl").string());

    const auto facts =
        decompose_stage(summaries, rule_decompose ? nullptr : &client, FactFilterOptions{});
    save_facts_file(facts, (fs::path(out_dir) / "facts.jsonl").string());

    const auto backend = make_backend(globals, scorer_endpoint, labels_path);
    const auto scored = score_stage(facts, corpus, summaries, *backend);
    save_scored_file(scored, (fs::path(out_dir) / "scored.jsonl").string());

    const ProfileOutputs profiles = profile_stage(scored, summaries, globals);
    write_text_file((fs::path(out_dir) / "bins.jsonl").string(), profiles.jsonl);
    write_text_file((fs::path(out_dir) / "bins.csv").string(), profiles.csv);

    const AggregateTable table = aggregate(profiles.profiles, AggregationMode::fact_pooled);
    write_text_file((fs::path(out_dir) / "report.md").string(),
                    render(table, RenderFormat::markdown));
    write_text_file((fs::path(out_dir) / "report.csv").string(),
                    render(table, RenderFormat::csv));
    write_text_file((fs::path(out_dir) / "report.json").string(),
                    render(table, RenderFormat::json));
    write_text_file((fs::path(out_dir) / "report.svg").string(),
                    render(table, RenderFormat::svg_lines));

    std::cout << "pipeline complete: " << summaries.size() << " summaries, " << facts.size()
              << " facts, " << scored.size() << " scored; network calls "
              << client.network_calls() << ", cache hits " << client.cache_hits() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"positional faithfulness analysis for long generated summaries"};
    app.require_subcommand(1);

    GlobalFlags globals;
    app.add_option("--bins", globals.bins, "positional bin count")
        ->check(CLI::IsMember({5, 10}));
    app.add_option("--coordinate", globals.coordinate, "per-fact binning coordinate")
        ->check(CLI::IsMember({"words", "facts", "sentences"}));
    app.add_option("--bin-mode", globals.bin_mode, "bin edge placement")
        ->check(CLI::IsMember({"fixed", "observed"}));
    app.add_option("--scorer", globals.scorer, "fact scoring backend")
        ->check(CLI::IsMember({"rouge", "http", "labels"}));
    app.add_option("--format", globals.format, "report output format")
        ->check(CLI::IsMember({"md", "csv", "json", "svg"}));

    // ingest
    std::string in_path, out_path;
    auto* ingest = app.add_subcommand("ingest", "validate a corpus JSONL file");
    ingest->add_option("--input", in_path, "corpus JSONL")->required();
    ingest->add_option("--output", out_path, "normalized corpus JSONL (optional)");
    ingest->callback([&] { run_ingest(in_path, out_path); });

    // generate
    LlmFlags gen_llm;
    DecodingFlags gen_decoding;
    std::string gen_input, gen_output, gen_regime = "auto", gen_sweep;
    bool gen_chunked = false;
    long gen_chunk_tokens = 2048;
    auto* generate = app.add_subcommand("generate", "generate summaries via the LLM service");
    generate->add_option("--input", gen_input, "corpus JSONL")->required();
    generate->add_option("--output", gen_output, "summaries JSONL")->required();
    generate->add_option("--regime", gen_regime, "override the per-document regime")
        ->check(CLI::IsMember({"auto", "standard", "long"}));
    generate->add_option("--sweep", gen_sweep, "JSON file with an array of decoding configs");
    generate->add_flag("--chunked", gen_chunked, "chunk-and-merge summarization");
    generate->add_option("--chunk-tokens", gen_chunk_tokens, "chunk budget in tokens");
    gen_llm.attach(generate);
    gen_decoding.attach(generate);
    generate->callback([&] {
        LlmClient client(gen_llm.to_config());
        const auto corpus = load_corpus(gen_input);
        std::optional<Regime> regime_choice;
        if (gen_regime != "auto") regime_choice = regime_from_string(gen_regime);
        std::vector<SummaryRecord> records;
        if (gen_chunked) {
            for (const auto& rec : corpus)
                records.push_back(
                    chunked_summarize(rec.document, gen_chunk_tokens, client,
                                      gen_decoding.to_config()));
        } else if (!gen_sweep.empty()) {
            std::ifstream sweep_in(gen_sweep);
            if (!sweep_in) throw DataError("cannot open sweep file: " + gen_sweep);
            std::vector<DecodingConfig> grid;
            for (const auto& j : nlohmann::json::parse(sweep_in))
                grid.push_back(DecodingConfig::from_json(j));
            std::vector<Document> docs;
            for (const auto& rec : corpus) docs.push_back(rec.document);
            const Regime regime = regime_choice.value_or(Regime::long_form);
            SweepResult result = sweep(docs, grid, regime, client);
            records = std::move(result.records);
            for (const auto& failure : result.failures)
                std::cerr << "sweep cell failed: " << failure.document_id << " ["
                          << failure.decoding.slug() << "]: " << failure.message << "\n";
        } else {
            records = generate_stage(corpus, client, regime_choice, gen_decoding.to_config());
        }
        save_summaries(records, gen_output);
        std::cout << "generated " << records.size() << " summaries (network calls "
                  << client.network_calls() << ", cache hits " << client.cache_hits() << ")\n";
    });

    // decompose
    LlmFlags dec_llm;
    std::string dec_input, dec_output, dec_mode = "llm";
    int dec_min_words = 3;
    bool dec_keep_duplicates = false, dec_keep_stopword_only = false;
    auto* decompose = app.add_subcommand("decompose", "split summaries into atomic facts");
    decompose->add_option("--summaries", dec_input, "summaries JSONL")->required();
    decompose->add_option("--output", dec_output, "facts JSONL")->required();
    decompose->add_option("--mode", dec_mode, "decomposition backend")
        ->check(CLI::IsMember({"llm", "rule"}));
    decompose->add_option("--min-words", dec_min_words, "filter: minimum words per fact");
    decompose->add_flag("--keep-duplicates", dec_keep_duplicates, "filter: keep duplicates");
    decompose->add_flag("--keep-stopword-only", dec_keep_stopword_only,
                        "filter: keep stop-word-only facts");
    dec_llm.attach(decompose);
    decompose->callback([&] {
        const auto summaries = load_summaries(dec_input);
        FactFilterOptions filter_opts;
        filter_opts.min_words = dec_min_words;
        filter_opts.drop_duplicates = !dec_keep_duplicates;
        filter_opts.require_content_word = !dec_keep_stopword_only;
        std::optional<LlmClient> client;
        if (dec_mode == "llm") client.emplace(dec_llm.to_config());
        const auto facts =
            decompose_stage(summaries, client ? &*client : nullptr, filter_opts);
        save_facts_file(facts, dec_output);
        long kept = 0;
        for (const auto& f : facts)
            if (f.kept) ++kept;
        std::cout << "decomposed " << facts.size() << " facts (" << kept << " kept) from "
                  << summaries.size() << " summaries\n";
    });

    // score
    std::string score_facts_path, score_corpus, score_output, score_labels, score_endpoint =
        "http://127.0.0.1:8090";
    std::string score_summaries;
    double score_threshold = 0.5;
    auto* score = app.add_subcommand("score", "score facts against source documents");
    score->add_option("--facts", score_facts_path, "facts JSONL")->required();
    score->add_option("--corpus", score_corpus, "corpus JSONL")->required();
    score->add_option("--summaries", score_summaries, "summaries JSONL")->required();
    score->add_option("--output", score_output, "scored-facts JSONL")->required();
    score->add_option("--labels", score_labels, "human label JSONL (for --scorer labels)");
    score->add_option("--scorer-endpoint", score_endpoint, "http_factcheck endpoint");
    score->add_option("--threshold", score_threshold, "overall-faithfulness threshold");
    score->callback([&] {
        const auto facts = load_facts_file(score_facts_path);
        const auto corpus = load_corpus(score_corpus);
        const auto summaries = load_summaries(score_summaries);
        const auto backend = make_backend(globals, score_endpoint, score_labels);
        const auto scored = score_stage(facts, corpus, summaries, *backend);
        save_scored_file(scored, score_output);
        if (!scored.empty())
            std::printf("scored %zu facts; overall faithfulness %.1f%% at threshold %.2f\n",
                        scored.size(), overall_faithfulness(scored, score_threshold),
                        score_threshold);
        else
            std::cout << "scored 0 facts\n";
    });

    // profile
    std::string prof_scored, prof_summaries, prof_output, prof_csv;
    auto* profile = app.add_subcommand("profile", "bin scored facts by output position");
    profile->add_option("--scored", prof_scored, "scored-facts JSONL")->required();
    profile->add_option("--summaries", prof_summaries, "summaries JSONL")->required();
    profile->add_option("--output", prof_output, "bin report JSONL")->required();
    profile->add_option("--csv", prof_csv, "bin report CSV (optional)");
    profile->callback([&] {
        const auto scored = load_scored_file(prof_scored);
        const auto summaries = load_summaries(prof_summaries);
        const ProfileOutputs outputs = profile_stage(scored, summaries, globals);
        write_text_file(prof_output, outputs.jsonl);
        if (!prof_csv.empty()) write_text_file(prof_csv, outputs.csv);
        std::cout << "profiled " << outputs.profiles.size() << " summaries into "
                  << globals.bins << " bins\n";
    });

    // attention
    std::string attn_bundle, attn_output, attn_orientation = "rows";
    auto* attention = app.add_subcommand("attention", "block-to-sentence attention profile");
    attention->add_option("--bundle", attn_bundle, "bundle dir (meta.json + matrix.f32 + spans.json)")
        ->required();
    attention->add_option("--output", attn_output, "profile CSV (stdout when omitted)");
    attention->add_option("--orientation", attn_orientation, "which axis attends")
        ->check(CLI::IsMember({"rows", "columns"}));
    attention->callback([&] { run_attention(attn_bundle, attn_output, attn_orientation); });

    // agree
    std::string agree_a, agree_b;
    auto* agree = app.add_subcommand("agree", "raw agreement between two label files");
    agree->add_option("--labels-a", agree_a, "label JSONL (annotator A)")->required();
    agree->add_option("--labels-b", agree_b, "label JSONL (annotator B)")->required();
    agree->callback([&] { run_agree(agree_a, agree_b); });

    // report
    std::string rep_bins, rep_summaries, rep_output, rep_mode = "fact_pooled";
    auto* report = app.add_subcommand("report", "aggregate bin profiles into a table");
    report->add_option("--input", rep_bins, "bin report JSONL (from profile)")->required();
    report->add_option("--summaries", rep_summaries, "summaries JSONL")->required();
    report->add_option("--output", rep_output, "output file (stdout when omitted)");
    report->add_option("--mode", rep_mode, "pooling mode")
        ->check(CLI::IsMember({"fact_pooled", "summary_mean"}));
    report->callback([&] {
        const auto summaries = load_summaries(rep_summaries);
        std::map<std::string, const SummaryRecord*> by_id;
        for (const auto& s : summaries) by_id[s.id] = &s;

        std::ifstream in(rep_bins, std::ios::binary);
        if (!in) throw DataError("cannot open bin report file: " + rep_bins);
        std::vector<SummaryProfile> profiles;
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            const auto j = nlohmann::json::parse(line);
            SummaryProfile p;
            p.summary_id = j.at("summary_id").get<std::string>();
            auto it = by_id.find(p.summary_id);
            if (it == by_id.end())
                throw DataError("bin report references unknown summary " + p.summary_id);
            p.group = GroupKey::for_summary(*it->second);
            p.profile = bin_report_from_json(j).profile;
            profiles.push_back(std::move(p));
        }
        const AggregateTable table =
            aggregate(profiles, aggregation_mode_from_string(rep_mode));
        const std::string rendered = render(table, render_format_from_string(globals.format));
        if (rep_output.empty()) std::cout << rendered;
        else write_text_file(rep_output, rendered);
    });

    // pipeline
    LlmFlags pipe_llm;
    DecodingFlags pipe_decoding;
    std::string pipe_input, pipe_out_dir, pipe_regime = "auto", pipe_labels;
    std::string pipe_scorer_endpoint = "http://127.0.0.1:8090";
    bool pipe_rule_decompose = false;
    auto* pipeline = app.add_subcommand("pipeline", "ingest -> generate -> decompose -> score "
                                                    "-> profile -> report");
    pipeline->add_option("--input", pipe_input, "corpus JSONL")->required();
    pipeline->add_option("--out", pipe_out_dir, "output directory")->required();
    pipeline->add_option("--regime", pipe_regime, "override the per-document regime")
        ->check(CLI::IsMember({"auto", "standard", "long"}));
    pipeline->add_option("--labels", pipe_labels, "human label JSONL (for --scorer labels)");
    pipeline->add_option("--scorer-endpoint", pipe_scorer_endpoint, "http_factcheck endpoint");
    pipeline->add_flag("--rule-decompose", pipe_rule_decompose,
                       "use the offline rule-based decomposition");
    pipe_llm.attach(pipeline);
    pipe_decoding.attach(pipeline);
    pipeline->callback([&] {
        std::optional<Regime> regime_choice;
        if (pipe_regime != "auto") regime_choice = regime_from_string(pipe_regime);
        run_pipeline(pipe_input, pipe_out_dir, pipe_llm, regime_choice, pipe_decoding.to_config(),
                     globals, pipe_scorer_endpoint, pipe_labels, pipe_rule_decompose);
    });

    // global flags are accepted on either side of the subcommand name
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ServiceError& e) {
        std::cerr << "service error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
