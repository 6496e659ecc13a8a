#pragma once
// Run configuration and the stage implementations behind the CLI:
// ingest -> split -> segment -> annotate -> shuffle-baseline ->
// evaluate / train -> report, all driven by one config file and writing
// into a single run directory with a config snapshot per stage.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "elicit/corpus.hpp"
#include "elicit/metrics.hpp"
#include "elicit/providers.hpp"
#include "elicit/reward.hpp"
#include "elicit/segmentation.hpp"
#include "elicit/trainer.hpp"

namespace elicit {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProviderConfig {
    std::string tokenizer = "reference";
    std::string scorer = "uniform";
    json scorer_params = json::object();
    std::string embedder = "reference";
    std::string extractor = "reference";
    std::vector<std::string> label_set;  // empty = extractor's full label set
};

struct RunConfig {
    std::vector<std::filesystem::path> corpus_paths;
    std::filesystem::path output_dir = "runs/default";
    std::array<double, 3> split_fractions = {0.8, 0.1, 0.1};
    std::uint64_t split_seed = 7;
    SegmentationConfig segmentation;
    double reward_gamma = 0.9;
    bool reward_audit = false;
    ProgressionConfig progression{5, 0.5};
    ProviderConfig providers;
    AWRConfig awr;
    DecodingParams decoding;
    std::size_t shard_size = 128;
    std::filesystem::path prompt_asset;  // optional prompted-baseline text
    json raw = json::object();

    static RunConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path.string());
        json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ConfigError("config parse error: " + std::string(e.what()));
        }
        return from_json(j);
    }

    static RunConfig from_json(const json& j) {
        RunConfig cfg;
        cfg.raw = j;
        try {
            if (j.contains("paths")) {
                const auto& p = j["paths"];
                if (p.contains("corpus"))
                    for (const auto& f : p["corpus"])
                        cfg.corpus_paths.emplace_back(f.get<std::string>());
                if (p.contains("output_dir"))
                    cfg.output_dir = p["output_dir"].get<std::string>();
            }
            if (j.contains("split")) {
                const auto& s = j["split"];
                if (s.contains("fractions")) {
                    auto f = s["fractions"].get<std::vector<double>>();
                    if (f.size() != 3)
                        throw ConfigError("split.fractions must hold three values");
                    cfg.split_fractions = {f[0], f[1], f[2]};
                }
                if (s.contains("seed")) cfg.split_seed = s["seed"].get<std::uint64_t>();
            }
            if (j.contains("segmentation")) {
                const auto& s = j["segmentation"];
                if (s.contains("window_turns"))
                    cfg.segmentation.window_turns = s["window_turns"].get<std::size_t>();
                if (s.contains("max_tokens"))
                    cfg.segmentation.max_tokens = s["max_tokens"].get<std::size_t>();
                if (s.contains("min_target_words"))
                    cfg.segmentation.min_target_words = s["min_target_words"].get<std::size_t>();
                if (s.contains("system_template"))
                    cfg.segmentation.system_template = s["system_template"].get<std::string>();
            }
            if (j.contains("reward")) {
                if (j["reward"].contains("gamma"))
                    cfg.reward_gamma = j["reward"]["gamma"].get<double>();
                if (j["reward"].contains("audit"))
                    cfg.reward_audit = j["reward"]["audit"].get<bool>();
            }
            if (j.contains("progression")) {
                if (j["progression"].contains("k"))
                    cfg.progression.k = j["progression"]["k"].get<std::size_t>();
                if (j["progression"].contains("gamma"))
                    cfg.progression.gamma = j["progression"]["gamma"].get<double>();
            }
            if (j.contains("providers")) {
                const auto& p = j["providers"];
                if (p.contains("tokenizer")) cfg.providers.tokenizer = p["tokenizer"];
                if (p.contains("scorer")) cfg.providers.scorer = p["scorer"];
                if (p.contains("scorer_params")) cfg.providers.scorer_params = p["scorer_params"];
                if (p.contains("embedder")) cfg.providers.embedder = p["embedder"];
                if (p.contains("extractor")) cfg.providers.extractor = p["extractor"];
                if (p.contains("label_set"))
                    cfg.providers.label_set = p["label_set"].get<std::vector<std::string>>();
            }
            if (j.contains("awr")) {
                const auto& a = j["awr"];
                if (a.contains("temperature")) cfg.awr.temperature = a["temperature"];
                if (a.contains("alpha")) cfg.awr.alpha = a["alpha"];
                if (a.contains("gamma")) cfg.awr.gamma = a["gamma"];
                if (a.contains("weight_max")) cfg.awr.weight_max = a["weight_max"];
                if (a.contains("batch_size")) cfg.awr.batch_size = a["batch_size"];
                if (a.contains("learning_rate")) cfg.awr.learning_rate = a["learning_rate"];
                if (a.contains("epochs")) cfg.awr.epochs = a["epochs"];
                if (a.contains("seed")) cfg.awr.seed = a["seed"];
            }
            if (j.contains("decoding")) {
                if (j["decoding"].contains("max_new_tokens"))
                    cfg.decoding.max_new_tokens = j["decoding"]["max_new_tokens"];
                if (j["decoding"].contains("temperature"))
                    cfg.decoding.temperature = j["decoding"]["temperature"];
                if (j["decoding"].contains("seed"))
                    cfg.decoding.seed = j["decoding"]["seed"];
            }
            if (j.contains("shard_size")) cfg.shard_size = j["shard_size"].get<std::size_t>();
            if (j.contains("prompt_asset"))
                cfg.prompt_asset = j["prompt_asset"].get<std::string>();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config field error: " + std::string(e.what()));
        }
        try {
            cfg.segmentation.validate();
            cfg.progression.validate();
            cfg.awr.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// provider registry

struct ProviderSet {
    std::shared_ptr<TokenizerProvider> tokenizer;
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<EntityExtractor> extractor;
    std::shared_ptr<LMScorer> scorer;
};

inline ProviderSet build_providers(const RunConfig& cfg) {
    ProviderSet set;
    if (cfg.providers.tokenizer == "reference")
        set.tokenizer = std::make_shared<ReferenceTokenizer>();
    else
        throw ConfigError("unknown tokenizer provider: " + cfg.providers.tokenizer);

    if (cfg.providers.embedder == "reference")
        set.embedder = std::make_shared<ReferenceEmbedder>();
    else
        throw ConfigError("unknown embedder provider: " + cfg.providers.embedder);

    if (cfg.providers.extractor == "reference")
        set.extractor = std::make_shared<ReferenceExtractor>();
    else
        throw ConfigError("unknown extractor provider: " + cfg.providers.extractor);

    if (cfg.providers.scorer == "uniform") {
        std::size_t vocab = cfg.providers.scorer_params.value("vocab", 1000);
        set.scorer = std::make_shared<UniformScorer>(vocab, set.tokenizer);
    } else if (cfg.providers.scorer == "tiny") {
        std::string artifact = cfg.providers.scorer_params.value("artifact", "");
        if (artifact.empty())
            throw ConfigError("tiny scorer requires scorer_params.artifact");
        if (!std::filesystem::exists(std::filesystem::path(artifact) / "model.json"))
            throw MissingArtifactError("adapter artifact not found: " + artifact);
        set.scorer = std::make_shared<TinyLM>(
            load_training_artifact(std::filesystem::path(artifact)));
    } else {
        throw ConfigError("unknown scorer provider: " + cfg.providers.scorer);
    }
    return set;
}

// ---------------------------------------------------------------------------
// stage helpers

inline void write_config_snapshot(const RunConfig& cfg, const std::string& stage) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir / ("config-" + stage + ".json"));
    out << cfg.raw.dump(2) << "\n";
}

inline std::vector<Dialogue> load_run_corpus(const RunConfig& cfg) {
    auto path = cfg.output_dir / "corpus.jsonl";
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("missing artifact from stage ingest: " + path.string());
    auto result = load_corpus({path});
    return result.dialogues;
}

inline CorpusSplit load_run_split(const RunConfig& cfg) {
    auto path = cfg.output_dir / "split.json";
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("missing artifact from stage split: " + path.string());
    std::ifstream in(path);
    json j;
    in >> j;
    return split_from_json(j);
}

inline std::uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 14695981039346656037ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// stages

inline int stage_ingest(const RunConfig& cfg, std::ostream& log) {
    if (cfg.corpus_paths.empty()) throw ConfigError("paths.corpus is empty");
    auto result = load_corpus(cfg.corpus_paths);
    write_config_snapshot(cfg, "ingest");
    save_corpus(result.dialogues, cfg.output_dir / "corpus.jsonl");
    {
        std::ofstream out(cfg.output_dir / "ingest-issues.jsonl");
        for (const auto& issue : result.issues) {
            json j;
            j["path"] = issue.path;
            j["line"] = issue.line;
            j["message"] = issue.message;
            out << j.dump() << "\n";
        }
    }
    ReferenceTokenizer tok;
    auto stats = corpus_stats(result.dialogues, tok);
    {
        std::ofstream out(cfg.output_dir / "stats.json");
        out << to_json(stats).dump(2) << "\n";
    }
    log << "ingest: " << result.dialogues.size() << " dialogues, " << stats.total.turns
        << " turns, " << result.issues.size() << " skipped records\n";
    return 0;
}

inline int stage_split(const RunConfig& cfg, std::ostream& log) {
    auto dialogues = load_run_corpus(cfg);
    std::vector<SplitWarning> warnings;
    auto split = stratified_split(dialogues, cfg.split_fractions, cfg.split_seed, &warnings);
    write_config_snapshot(cfg, "split");
    {
        std::ofstream out(cfg.output_dir / "split.json");
        out << to_json(split).dump(2) << "\n";
    }
    for (const auto& w : warnings) log << "warning: " << w.message << "\n";
    log << "split: train " << split.train.size() << ", dev " << split.dev.size()
        << ", test " << split.test.size() << "\n";
    return 0;
}

inline std::map<std::string, std::vector<Block>> segment_by_split(
    const RunConfig& cfg, const std::vector<Dialogue>& dialogues, const CorpusSplit& split,
    const TokenizerProvider& tokenizer, DropReport* report = nullptr) {
    std::map<std::string, std::vector<Block>> buckets;
    for (const auto& d : dialogues) {
        const char* bucket = split.bucket_of(d.dialogue_id);
        if (!bucket) continue;
        auto blocks = segment_dialogue(d, cfg.segmentation, tokenizer, report);
        auto& dst = buckets[bucket];
        dst.insert(dst.end(), blocks.begin(), blocks.end());
    }
    return buckets;
}

inline int stage_segment(const RunConfig& cfg, std::ostream& log) {
    auto dialogues = load_run_corpus(cfg);
    auto split = load_run_split(cfg);
    auto providers = build_providers(cfg);
    DropReport drops;
    auto buckets = segment_by_split(cfg, dialogues, split, *providers.tokenizer, &drops);
    write_config_snapshot(cfg, "segment");
    std::size_t total = 0;
    for (const char* bucket : {"train", "dev", "test"}) {
        const auto& blocks = buckets[bucket];
        save_blocks(blocks, cfg.segmentation,
                    cfg.output_dir / ("blocks-" + std::string(bucket) + ".jsonl"));
        log << "segment: " << bucket << " " << blocks.size() << " blocks\n";
        total += blocks.size();
    }
    log << "segment: total " << total << " (dropped " << drops.short_target
        << " short targets, " << drops.over_token_cap << " over token cap)\n";
    return 0;
}

inline int stage_annotate(const RunConfig& cfg, std::ostream& log) {
    auto dialogues = load_run_corpus(cfg);
    auto split = load_run_split(cfg);
    auto providers = build_providers(cfg);
    for (const char* bucket : {"train", "dev", "test"}) {
        auto path = cfg.output_dir / ("blocks-" + std::string(bucket) + ".jsonl");
        if (!std::filesystem::exists(path))
            throw MissingArtifactError("missing artifact from stage segment: " +
                                       path.string());
    }
    write_config_snapshot(cfg, "annotate");
    auto audit_path = cfg.output_dir / "reward-audit.jsonl";
    if (cfg.reward_audit && std::filesystem::exists(audit_path))
        std::filesystem::remove(audit_path);

    // Re-segment so blocks carry their target turn indices, annotate on the
    // full dialogues, then overwrite the block files.
    std::map<std::string, std::vector<Block>> annotated;
    for (const auto& d : dialogues) {
        const char* bucket = split.bucket_of(d.dialogue_id);
        if (!bucket) continue;
        auto blocks = segment_dialogue(d, cfg.segmentation, *providers.tokenizer);
        auto trace = annotate_rewards(d, *providers.extractor, cfg.reward_gamma);
        for (const auto& w : trace.extractor_warnings) log << "warning: " << w << "\n";
        blocks = attach_rewards_to_blocks(std::move(blocks), trace, d.turns.size());
        if (cfg.reward_audit) write_reward_audit(trace, audit_path);
        auto& dst = annotated[bucket];
        dst.insert(dst.end(), blocks.begin(), blocks.end());
    }
    for (const char* bucket : {"train", "dev", "test"}) {
        save_blocks(annotated[bucket], cfg.segmentation,
                    cfg.output_dir / ("blocks-" + std::string(bucket) + ".jsonl"));
        log << "annotate: " << bucket << " " << annotated[bucket].size() << " blocks\n";
    }
    return 0;
}

inline int stage_shuffle_baseline(const RunConfig& cfg, std::ostream& log) {
    auto dialogues = load_run_corpus(cfg);
    auto split = load_run_split(cfg);
    auto providers = build_providers(cfg);
    write_config_snapshot(cfg, "shuffle-baseline");
    std::vector<Block> blocks;
    std::vector<Dialogue> shuffled_dialogues;
    for (const auto& d : dialogues) {
        if (!split.test.count(d.dialogue_id)) continue;
        auto shuffled = shuffled_baseline(d, cfg.split_seed);
        auto b = segment_dialogue(shuffled, cfg.segmentation, *providers.tokenizer);
        blocks.insert(blocks.end(), b.begin(), b.end());
        shuffled_dialogues.push_back(std::move(shuffled));
    }
    save_corpus(shuffled_dialogues, cfg.output_dir / "corpus-shuffled-test.jsonl");
    save_blocks(blocks, cfg.segmentation, cfg.output_dir / "blocks-shuffled.jsonl");
    log << "shuffle-baseline: " << blocks.size() << " blocks from "
        << shuffled_dialogues.size() << " test dialogues\n";
    return 0;
}

inline int stage_evaluate(const RunConfig& cfg, std::ostream& log,
                          const std::string& block_file = "blocks-test.jsonl",
                          const std::string& report_file = "report.json") {
    auto path = cfg.output_dir / block_file;
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("missing artifact for evaluate: " + path.string());
    auto blocks = load_blocks(path);
    auto providers = build_providers(cfg);
    write_config_snapshot(cfg, "evaluate");

    EvaluationConfig ecfg;
    ecfg.segmentation = cfg.segmentation;
    ecfg.progression = cfg.progression;
    ecfg.decoding = cfg.decoding;
    if (!cfg.prompt_asset.empty()) {
        std::ifstream in(cfg.prompt_asset);
        if (!in) throw MissingArtifactError("prompt asset not found: " +
                                            cfg.prompt_asset.string());
        std::stringstream ss;
        ss << in.rdbuf();
        std::string prompt = ss.str();
        // prompted-baseline profile: the extra instruction rides on the
        // system message of every block
        ecfg.segmentation.system_template =
            cfg.segmentation.system_template + "\n\n" + prompt;
    }
    auto report = evaluate_generation_protocol(blocks, *providers.scorer,
                                               *providers.embedder, *providers.tokenizer,
                                               ecfg);
    report.config_echo = cfg.raw;
    {
        std::ofstream out(cfg.output_dir / report_file);
        out << to_json(report).dump(2) << "\n";
    }
    log << "evaluate: " << report.total.n_blocks << " blocks, micro ppl "
        << report.total.micro_ppl << ", progression " << report.total.progression_mean
        << ", tlr " << report.total.tlr << "\n";
    return 0;
}

inline int stage_train(const RunConfig& cfg, std::ostream& log) {
    auto train_path = cfg.output_dir / "blocks-train.jsonl";
    auto dev_path = cfg.output_dir / "blocks-dev.jsonl";
    if (!std::filesystem::exists(train_path))
        throw MissingArtifactError("missing artifact from stage annotate: " +
                                   train_path.string());
    auto train_blocks = load_blocks(train_path);
    if (train_blocks.empty()) throw std::runtime_error("empty train split");
    std::vector<Block> dev_blocks;
    if (std::filesystem::exists(dev_path)) dev_blocks = load_blocks(dev_path);
    write_config_snapshot(cfg, "train");

    std::vector<std::vector<Message>> rendered;
    for (const auto& b : train_blocks)
        rendered.push_back(render_block_messages(b, cfg.segmentation));
    TinyLMDims dims;
    TinyLM model(TinyLM::build_vocab(rendered), dims, cfg.awr.seed);
    TinyLMTrainer trainer(model, cfg.awr);
    auto tlog = trainer.train(train_blocks, dev_blocks, cfg.segmentation);
    for (const auto& w : tlog.warnings) log << "warning: " << w << "\n";

    std::string manifest_hash;
    if (std::filesystem::exists(cfg.output_dir / "split.json")) {
        std::ostringstream h;
        h << std::hex << file_hash(cfg.output_dir / "split.json");
        manifest_hash = h.str();
    }
    save_training_artifact(cfg.output_dir / "adapter", model, cfg.awr, tlog, manifest_hash);
    if (!tlog.steps.empty())
        log << "train: " << tlog.steps.size() << " steps, final policy loss "
            << tlog.steps.back().policy_loss << ", final value loss "
            << tlog.steps.back().value_loss << "\n";
    for (const auto& [epoch, ppl] : tlog.dev_micro_ppl)
        log << "train: epoch " << epoch << " dev micro ppl " << ppl << "\n";
    return 0;
}

inline int stage_report(const RunConfig& cfg, std::ostream& out) {
    auto path = cfg.output_dir / "report.json";
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("missing artifact from stage evaluate: " + path.string());
    std::ifstream in(path);
    json j;
    in >> j;
    if (!j.contains("per_domain") || j["per_domain"].empty())
        throw std::runtime_error("no evaluation records");
    write_config_snapshot(cfg, "report");
    out << std::left << std::setw(30) << "domain" << std::right << std::setw(12)
        << "progression" << std::setw(10) << "tlr" << std::setw(12) << "micro_ppl"
        << std::setw(10) << "mean_len" << std::setw(10) << "n_blocks" << "\n";
    auto print_row = [&](const std::string& name, const json& row) {
        out << std::left << std::setw(30) << name << std::right << std::fixed
            << std::setprecision(3) << std::setw(12) << row["progression"].get<double>()
            << std::setw(10) << row["tlr"].get<double>() << std::setw(12)
            << row["micro_ppl"].get<double>() << std::setw(10)
            << row["mean_len"].get<double>() << std::setw(10)
            << row["n_blocks"].get<std::size_t>() << "\n";
    };
    for (const auto& [domain, row] : j["per_domain"].items()) print_row(domain, row);
    print_row("total", j["total"]);
    if (j.contains("providers")) out << "providers: " << j["providers"].dump() << "\n";
    return 0;
}

// Exit codes: 0 success, 2 config error, 3 missing artifact, 4 runtime failure.
inline int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
    try {
        if (name == "ingest") return stage_ingest(cfg, log);
        if (name == "split") return stage_split(cfg, log);
        if (name == "segment") return stage_segment(cfg, log);
        if (name == "annotate") return stage_annotate(cfg, log);
        if (name == "shuffle-baseline") return stage_shuffle_baseline(cfg, log);
        if (name == "evaluate") return stage_evaluate(cfg, log);
        if (name == "evaluate-shuffled")
            return stage_evaluate(cfg, log, "blocks-shuffled.jsonl", "report-shuffled.json");
        if (name == "train") return stage_train(cfg, log);
        if (name == "report") return stage_report(cfg, log);
        throw ConfigError("unknown stage: " + name);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifactError& e) {
        log << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace elicit
