#pragma once
// Abstraction boundary for model-dependent computation: tokenization,
// LM scoring/generation with hidden-state access, sentence embedding and
// entity extraction. Ships deterministic reference implementations so the
// whole pipeline and test suite run without heavyweight models.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace elicit {

struct Message {
    std::string role;     // "system" | "user" | "assistant"
    std::string content;
};

class TokenizerProvider {
public:
    virtual ~TokenizerProvider() = default;
    virtual std::vector<std::string> tokenize(const std::string& text) const = 0;
    virtual std::string identity() const = 0;

    std::size_t count(const std::string& text) const { return tokenize(text).size(); }
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<double> embed(const std::string& text) const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string identity() const = 0;
};

struct EntityMention {
    std::string surface;
    std::string label;
};

class EntityExtractor {
public:
    virtual ~EntityExtractor() = default;
    virtual std::vector<EntityMention> extract(const std::string& utterance) const = 0;
    virtual std::string identity() const = 0;
};

struct DecodingParams {
    std::size_t max_new_tokens = 64;
    double temperature = 0.0;  // 0 = greedy
    std::uint64_t seed = 0;
};

// Scoring/generation contract. score_target returns per-token log
// probabilities of the final assistant message given everything before it;
// hidden_state returns the representation at the last non-padding position
// of the rendered sequence (the end-of-sequence slot under padded batching).
class LMScorer {
public:
    virtual ~LMScorer() = default;
    virtual std::vector<double> score_target(const std::vector<Message>& messages) const = 0;
    virtual std::string generate(const std::vector<Message>& context,
                                 const DecodingParams& params) const = 0;
    virtual std::vector<double> hidden_state(const std::vector<Message>& messages) const = 0;
    virtual std::string identity() const = 0;
};

// ---------------------------------------------------------------------------
// reference tokenizer: whitespace-and-punctuation splitter

class ReferenceTokenizer final : public TokenizerProvider {
public:
    std::vector<std::string> tokenize(const std::string& text) const override {
        std::vector<std::string> tokens;
        std::string current;
        for (unsigned char c : text) {
            if (std::isspace(c)) {
                if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
            } else if (std::isalnum(c) || c >= 0x80) {
                current.push_back(static_cast<char>(c));
            } else {
                if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
                tokens.push_back(std::string(1, static_cast<char>(c)));
            }
        }
        if (!current.empty()) tokens.push_back(std::move(current));
        return tokens;
    }
    std::string identity() const override { return "reference-tokenizer/1"; }
};

// ---------------------------------------------------------------------------
// reference embedder: hashed bag of words, L2-normalized, dimension 64.
// Empty token lists map to the constant basis vector e0 (flagged upstream).

class ReferenceEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDim = 64;

    std::vector<double> embed(const std::string& text) const override {
        std::vector<double> v(kDim, 0.0);
        ReferenceTokenizer tok;
        auto tokens = tok.tokenize(text);
        if (tokens.empty()) {
            v[0] = 1.0;
            return v;
        }
        for (auto& t : tokens) {
            for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            v[fnv1a(t) % kDim] += 1.0;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    }
    std::size_t dimension() const override { return kDim; }
    std::string identity() const override { return "reference-embedder/bow64"; }

    static std::uint64_t fnv1a(const std::string& s) {
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// reference extractor
//
// Rule table:
//   1. Words are maximal runs of non-space characters; a word is
//      "capitalized" when its first alphabetic character is uppercase.
//   2. A word is sentence-initial when it is the first word of the text or
//      the first word after a terminator (. ! ?). Sentence-initial words
//      never join a run, so "The End" at text start yields only "End".
//   3. Maximal runs of consecutive capitalized non-sentence-initial words
//      are emitted with label "CAP" (e.g., "Green Bay").
//   4. Standalone 4-digit numbers are emitted with label "YEAR".

class ReferenceExtractor final : public EntityExtractor {
public:
    std::vector<EntityMention> extract(const std::string& utterance) const override {
        struct Word {
            std::string stripped;  // punctuation-trimmed
            bool sentence_initial;
            bool ends_sentence;
        };
        std::vector<Word> words;
        std::string raw;
        auto flush = [&](bool& initial) {
            if (raw.empty()) return;
            std::size_t b = 0, e = raw.size();
            while (b < e && std::ispunct(static_cast<unsigned char>(raw[b]))) ++b;
            while (e > b && std::ispunct(static_cast<unsigned char>(raw[e - 1]))) --e;
            bool terminator = false;
            for (std::size_t i = e; i < raw.size(); ++i)
                if (raw[i] == '.' || raw[i] == '!' || raw[i] == '?') terminator = true;
            words.push_back({raw.substr(b, e - b), initial, terminator});
            initial = terminator;
            raw.clear();
        };
        bool initial = true;
        for (unsigned char c : utterance) {
            if (std::isspace(c)) flush(initial);
            else raw.push_back(static_cast<char>(c));
        }
        flush(initial);

        std::vector<EntityMention> out;
        std::string run;
        auto close_run = [&]() {
            if (!run.empty()) out.push_back({run, "CAP"});
            run.clear();
        };
        for (const auto& w : words) {
            if (is_year(w.stripped)) {
                close_run();
                out.push_back({w.stripped, "YEAR"});
                continue;
            }
            if (!w.sentence_initial && is_capitalized(w.stripped)) {
                if (!run.empty()) run += " ";
                run += w.stripped;
                if (w.ends_sentence) close_run();
            } else {
                close_run();
            }
        }
        close_run();
        return out;
    }
    std::string identity() const override { return "reference-extractor/cap-year"; }

private:
    static bool is_capitalized(const std::string& w) {
        for (unsigned char c : w) {
            if (std::isalpha(c)) return std::isupper(c) != 0;
        }
        return false;
    }
    static bool is_year(const std::string& w) {
        if (w.size() != 4) return false;
        for (unsigned char c : w)
            if (!std::isdigit(c)) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// scorer test doubles

// Assigns log(1/vocab) to every target token; generation repeats a fixed
// token. Micro perplexity under this scorer equals the vocabulary size.
class UniformScorer final : public LMScorer {
public:
    explicit UniformScorer(std::size_t vocab, std::shared_ptr<TokenizerProvider> tok)
        : vocab_(vocab), tok_(std::move(tok)) {}

    std::vector<double> score_target(const std::vector<Message>& messages) const override {
        const auto& target = messages.back().content;
        std::vector<double> lp(tok_->count(target),
                               -std::log(static_cast<double>(vocab_)));
        return lp;
    }
    std::string generate(const std::vector<Message>&, const DecodingParams& p) const override {
        std::string out;
        for (std::size_t i = 0; i < p.max_new_tokens && i < 4; ++i)
            out += i ? " token" : "token";
        return out;
    }
    std::vector<double> hidden_state(const std::vector<Message>&) const override {
        return std::vector<double>(8, 0.0);
    }
    std::string identity() const override {
        return "uniform-scorer/v" + std::to_string(vocab_);
    }

private:
    std::size_t vocab_;
    std::shared_ptr<TokenizerProvider> tok_;
};

// Generates exactly the real target it was primed with; used to pin the
// generation-evaluation protocol in tests.
class EchoScorer final : public LMScorer {
public:
    using TargetLookup = std::function<std::string(const std::vector<Message>&)>;
    explicit EchoScorer(TargetLookup lookup) : lookup_(std::move(lookup)) {}

    std::vector<double> score_target(const std::vector<Message>& messages) const override {
        ReferenceTokenizer tok;
        return std::vector<double>(tok.count(messages.back().content), 0.0);
    }
    std::string generate(const std::vector<Message>& context,
                         const DecodingParams&) const override {
        return lookup_(context);
    }
    std::vector<double> hidden_state(const std::vector<Message>&) const override {
        return std::vector<double>(8, 0.0);
    }
    std::string identity() const override { return "echo-scorer"; }

private:
    TargetLookup lookup_;
};

}  // namespace elicit
