#pragma once
// The three evaluation dimensions: Conformity (micro perplexity + response
// length), Progression and Turn-Length Ratio, with per-domain aggregation
// and the next-turn generation evaluation protocol.

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "elicit/corpus.hpp"
#include "elicit/providers.hpp"
#include "elicit/segmentation.hpp"

namespace elicit {

struct ProgressionConfig {
    std::size_t k = 5;   // context window; 5 for six-turn blocks
    double gamma = 0.5;  // decay; 1.0 gives the symmetric corpus form with k=1

    void validate() const {
        if (k < 1) throw std::invalid_argument("progression k must be >= 1");
        if (gamma <= 0.0 || gamma > 1.0)
            throw std::invalid_argument("progression gamma must lie in (0, 1]");
    }
};

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("embedding dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("zero vector in cosine distance");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

// Average decayed cosine distance between each utterance embedding and its
// k predecessors; lies in [0, 2]. With k=1, gamma=1 this reduces to the
// symmetric chain of adjacent-pair distances.
inline double progression(const std::vector<std::vector<double>>& embeddings,
                          const ProgressionConfig& cfg) {
    cfg.validate();
    const std::size_t L = embeddings.size();
    if (L <= cfg.k) throw std::invalid_argument("sequence too short for window");
    double decay_norm = 0.0;
    for (std::size_t j = 1; j <= cfg.k; ++j) decay_norm += std::pow(cfg.gamma, j);
    double total = 0.0;
    for (std::size_t t = cfg.k; t < L; ++t) {
        double inner = 0.0;
        for (std::size_t j = 1; j <= cfg.k; ++j)
            inner += std::pow(cfg.gamma, j) * cosine_distance(embeddings[t - j], embeddings[t]);
        total += inner / decay_norm;
    }
    return total / static_cast<double>(L - cfg.k);
}

// mean(respondent token counts) / mean(elicitor token counts); > 1 means
// respondents are the more verbose side.
inline double turn_length_ratio(const std::vector<double>& respondent_lengths,
                                const std::vector<double>& elicitor_lengths) {
    if (respondent_lengths.empty())
        throw std::invalid_argument("turn_length_ratio: respondent side empty");
    if (elicitor_lengths.empty())
        throw std::invalid_argument("turn_length_ratio: elicitor side empty");
    double mr = std::accumulate(respondent_lengths.begin(), respondent_lengths.end(), 0.0) /
                static_cast<double>(respondent_lengths.size());
    double me = std::accumulate(elicitor_lengths.begin(), elicitor_lengths.end(), 0.0) /
                static_cast<double>(elicitor_lengths.size());
    if (me == 0.0) throw std::invalid_argument("turn_length_ratio: elicitor mean is zero");
    return mr / me;
}

// Pools log probabilities across all target tokens before exponentiation.
inline double micro_perplexity(const std::vector<std::vector<double>>& scored_segments) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& seg : scored_segments) {
        for (double lp : seg) {
            if (lp > 0.0)
                throw std::invalid_argument("log probability above zero");
            total += lp;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("no target tokens");
    return std::exp(-total / static_cast<double>(count));
}

// Per-segment perplexities averaged after exponentiation; secondary figure.
inline double macro_perplexity(const std::vector<std::vector<double>>& scored_segments) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& seg : scored_segments) {
        if (seg.empty()) continue;
        double s = std::accumulate(seg.begin(), seg.end(), 0.0);
        total += std::exp(-s / static_cast<double>(seg.size()));
        ++n;
    }
    if (n == 0) throw std::invalid_argument("no target tokens");
    return total / static_cast<double>(n);
}

struct ResponseLengthStats {
    double mean = 0.0;
    std::size_t counted = 0;
    std::size_t excluded = 0;  // empty-after-trim utterances
    std::string tokenizer_identity;
};

inline ResponseLengthStats response_length_stats(const std::vector<std::string>& utterances,
                                                 const TokenizerProvider& tokenizer) {
    if (utterances.empty())
        throw std::invalid_argument("response_length_stats: empty utterance list");
    ResponseLengthStats stats;
    stats.tokenizer_identity = tokenizer.identity();
    double total = 0.0;
    for (const auto& u : utterances) {
        if (trim_copy(u).empty()) {
            ++stats.excluded;
            continue;
        }
        total += static_cast<double>(tokenizer.count(u));
        ++stats.counted;
    }
    if (stats.counted == 0)
        throw std::invalid_argument("response_length_stats: all utterances empty");
    stats.mean = total / static_cast<double>(stats.counted);
    return stats;
}

// ---------------------------------------------------------------------------
// per-domain report

struct DomainMetrics {
    double progression_mean = 0.0;
    double tlr = 0.0;
    double micro_ppl = 0.0;
    double macro_ppl = 0.0;
    double mean_response_length = 0.0;
    std::size_t n_blocks = 0;
    std::size_t skipped = 0;
};

struct MetricReport {
    std::map<std::string, DomainMetrics> per_domain;
    DomainMetrics total;
    std::string tokenizer_identity;
    std::string embedder_identity;
    std::string scorer_identity;
    json config_echo = json::object();
};

inline json to_json(const MetricReport& r) {
    auto row = [](const DomainMetrics& m) {
        json j;
        j["progression"] = m.progression_mean;
        j["tlr"] = m.tlr;
        j["micro_ppl"] = m.micro_ppl;
        j["macro_ppl"] = m.macro_ppl;
        j["mean_len"] = m.mean_response_length;
        j["n_blocks"] = m.n_blocks;
        j["skipped"] = m.skipped;
        return j;
    };
    json j;
    j["per_domain"] = json::object();
    for (const auto& [domain, m] : r.per_domain) j["per_domain"][domain] = row(m);
    j["total"] = row(r.total);
    j["providers"] = {{"tokenizer", r.tokenizer_identity},
                      {"embedder", r.embedder_identity},
                      {"scorer", r.scorer_identity}};
    j["config"] = r.config_echo;
    return j;
}

// ---------------------------------------------------------------------------
// next-turn generation evaluation protocol
//
// Each test block is truncated by removing the final elicitor turn; the
// scorer generates that turn from the five-turn context. Response length and
// Progression are computed on the generation; TLR pairs generated elicitor
// turns with the real respondent turns of the context; micro perplexity
// scores the REAL target under the scorer.

struct EvaluationConfig {
    SegmentationConfig segmentation;
    ProgressionConfig progression{5, 0.5};
    DecodingParams decoding;
};

inline MetricReport evaluate_generation_protocol(const std::vector<Block>& blocks,
                                                 const LMScorer& scorer,
                                                 const EmbeddingProvider& embedder,
                                                 const TokenizerProvider& tokenizer,
                                                 const EvaluationConfig& cfg) {
    struct Accum {
        std::vector<double> progressions;
        std::vector<double> respondent_lengths;
        std::vector<double> elicitor_lengths;
        std::vector<std::vector<double>> scored;
        std::vector<std::string> generations;
        std::size_t skipped = 0;
    };
    std::map<std::string, Accum> per_domain;

    for (const auto& b : blocks) {
        Accum& acc = per_domain[to_string(b.domain)];
        auto messages = render_block_messages(b, cfg.segmentation);
        std::vector<Message> context(messages.begin(), messages.end() - 1);
        std::string generated;
        try {
            generated = scorer.generate(context, cfg.decoding);
        } catch (const std::exception&) {
            ++acc.skipped;
            continue;
        }
        acc.generations.push_back(generated);

        std::vector<std::vector<double>> embeddings;
        for (const auto& turn : b.context) embeddings.push_back(embedder.embed(turn.utterance));
        embeddings.push_back(embedder.embed(generated));
        if (embeddings.size() > cfg.progression.k)
            acc.progressions.push_back(progression(embeddings, cfg.progression));

        for (const auto& turn : b.context)
            if (turn.role == Role::respondent)
                acc.respondent_lengths.push_back(
                    static_cast<double>(tokenizer.count(turn.utterance)));
        acc.elicitor_lengths.push_back(static_cast<double>(tokenizer.count(generated)));

        acc.scored.push_back(scorer.score_target(messages));
    }

    MetricReport report;
    report.tokenizer_identity = tokenizer.identity();
    report.embedder_identity = embedder.identity();
    report.scorer_identity = scorer.identity();

    Accum all;
    for (auto& [domain, acc] : per_domain) {
        DomainMetrics m;
        m.n_blocks = acc.generations.size();
        m.skipped = acc.skipped;
        if (!acc.progressions.empty())
            m.progression_mean =
                std::accumulate(acc.progressions.begin(), acc.progressions.end(), 0.0) /
                static_cast<double>(acc.progressions.size());
        if (!acc.respondent_lengths.empty() && !acc.elicitor_lengths.empty())
            m.tlr = turn_length_ratio(acc.respondent_lengths, acc.elicitor_lengths);
        if (!acc.scored.empty()) {
            m.micro_ppl = micro_perplexity(acc.scored);
            m.macro_ppl = macro_perplexity(acc.scored);
        }
        if (!acc.generations.empty())
            m.mean_response_length = response_length_stats(acc.generations, tokenizer).mean;
        report.per_domain[domain] = m;

        all.progressions.insert(all.progressions.end(), acc.progressions.begin(),
                                acc.progressions.end());
        all.respondent_lengths.insert(all.respondent_lengths.end(),
                                      acc.respondent_lengths.begin(),
                                      acc.respondent_lengths.end());
        all.elicitor_lengths.insert(all.elicitor_lengths.end(),
                                    acc.elicitor_lengths.begin(), acc.elicitor_lengths.end());
        all.scored.insert(all.scored.end(), acc.scored.begin(), acc.scored.end());
        all.generations.insert(all.generations.end(), acc.generations.begin(),
                               acc.generations.end());
        all.skipped += acc.skipped;
    }
    DomainMetrics m;
    m.n_blocks = all.generations.size();
    m.skipped = all.skipped;
    if (!all.progressions.empty())
        m.progression_mean =
            std::accumulate(all.progressions.begin(), all.progressions.end(), 0.0) /
            static_cast<double>(all.progressions.size());
    if (!all.respondent_lengths.empty() && !all.elicitor_lengths.empty())
        m.tlr = turn_length_ratio(all.respondent_lengths, all.elicitor_lengths);
    if (!all.scored.empty()) {
        m.micro_ppl = micro_perplexity(all.scored);
        m.macro_ppl = macro_perplexity(all.scored);
    }
    if (!all.generations.empty())
        m.mean_response_length = response_length_stats(all.generations, tokenizer).mean;
    report.total = m;
    return report;
}

// ---------------------------------------------------------------------------
// corpus statistics (Table-style per-domain rows)

struct CorpusStatsRow {
    std::size_t dialogues = 0;
    std::size_t turns = 0;
    std::size_t tokens = 0;
    double avg_turns_per_dialogue = 0.0;
    double avg_tokens_per_turn = 0.0;
};

struct CorpusStats {
    std::map<std::string, CorpusStatsRow> per_domain;
    CorpusStatsRow total;
    std::string tokenizer_identity;
};

inline CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues,
                                const TokenizerProvider& tokenizer) {
    CorpusStats stats;
    stats.tokenizer_identity = tokenizer.identity();
    for (const auto& d : dialogues) {
        CorpusStatsRow& row = stats.per_domain[to_string(d.domain)];
        ++row.dialogues;
        ++stats.total.dialogues;
        for (const auto& t : d.turns) {
            ++row.turns;
            ++stats.total.turns;
            std::size_t n = tokenizer.count(t.utterance);
            row.tokens += n;
            stats.total.tokens += n;
        }
    }
    auto finish = [](CorpusStatsRow& row) {
        if (row.dialogues)
            row.avg_turns_per_dialogue =
                static_cast<double>(row.turns) / static_cast<double>(row.dialogues);
        if (row.turns)
            row.avg_tokens_per_turn =
                static_cast<double>(row.tokens) / static_cast<double>(row.turns);
    };
    for (auto& [_, row] : stats.per_domain) finish(row);
    finish(stats.total);
    return stats;
}

inline json to_json(const CorpusStats& s) {
    auto row = [](const CorpusStatsRow& r) {
        json j;
        j["dialogues"] = r.dialogues;
        j["turns"] = r.turns;
        j["tokens"] = r.tokens;
        j["avg_turns_per_dialogue"] = r.avg_turns_per_dialogue;
        j["avg_tokens_per_turn"] = r.avg_tokens_per_turn;
        return j;
    };
    json j;
    j["per_domain"] = json::object();
    for (const auto& [domain, r] : s.per_domain) j["per_domain"][domain] = row(r);
    j["total"] = row(s.total);
    j["tokenizer"] = s.tokenizer_identity;
    return j;
}

}  // namespace elicit
