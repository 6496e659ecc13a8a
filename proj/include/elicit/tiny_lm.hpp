#pragma once
// A small feedforward n-gram language model with frozen base weights,
// low-rank adapters on the hidden and output projections, and a linear
// value head. Small enough to train on CPU inside the test suite while
// exercising the full offline-RL surface: masked weighted likelihood,
// jointly trained critic, frozen-base guarantee, deterministic seeding.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "elicit/corpus.hpp"
#include "elicit/providers.hpp"
#include "elicit/segmentation.hpp"
#include "elicit/training.hpp"

namespace elicit {

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline void gaussian_init(Matrix& m, std::mt19937_64& rng, double stddev) {
    // Box-Muller on raw 53-bit draws keeps initialization identical across
    // standard libraries.
    auto uniform = [&rng]() {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        double u1 = uniform(), u2 = uniform();
        m.data[i] = stddev * std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(2.0 * 3.14159265358979323846 * u2);
    }
}

// ---------------------------------------------------------------------------
// vocabulary

class WordVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSystem = 2;
    static constexpr int kUser = 3;
    static constexpr int kAssistant = 4;
    static constexpr int kEos = 5;
    static constexpr int kSpecialCount = 6;

    WordVocab() {
        for (const char* s : {"<pad>", "<unk>", "<system>", "<user>", "<assistant>", "<eos>"})
            add(s);
    }

    int add(const std::string& token) {
        auto [it, inserted] = index_.try_emplace(token, static_cast<int>(tokens_.size()));
        if (inserted) tokens_.push_back(token);
        return it->second;
    }

    int lookup(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return tokens_.size(); }

    static int role_marker(const std::string& role) {
        if (role == "system") return kSystem;
        if (role == "user") return kUser;
        return kAssistant;
    }

    json to_json() const { return json(tokens_); }
    static WordVocab from_json(const json& j) {
        WordVocab v;
        v.tokens_.clear();
        v.index_.clear();
        for (const auto& t : j) v.add(t.get<std::string>());
        return v;
    }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// model

struct TinyLMDims {
    std::size_t d_embed = 16;
    std::size_t d_hidden = 32;
    std::size_t context = 4;     // n-gram order minus one
    std::size_t lora_rank = 8;
};

struct RenderedSample {
    std::vector<int> tokens;
    std::vector<int> labels;          // labels[t] is the target at position t
    std::vector<char> mask;           // 1 where the label is an elicitor target token
    double return_to_go = 0.0;
    std::size_t eos_position = 0;     // last non-padding position
};

class TinyLM final : public LMScorer {
public:
    TinyLM() = default;

    TinyLM(WordVocab vocab, TinyLMDims dims, std::uint64_t seed)
        : vocab_(std::move(vocab)), dims_(dims) {
        const std::size_t V = vocab_.size();
        std::mt19937_64 rng(seed);
        embed_ = Matrix(V, dims_.d_embed);
        w_base_ = Matrix(dims_.d_hidden, dims_.context * dims_.d_embed);
        b_base_ = Matrix(1, dims_.d_hidden);
        u_base_ = Matrix(V, dims_.d_hidden);
        c_base_ = Matrix(1, V);
        gaussian_init(embed_, rng, 0.1);
        gaussian_init(w_base_, rng, 0.1);
        gaussian_init(u_base_, rng, 0.1);
        // LoRA convention: the A factor starts at zero so the adapted model
        // initially equals the frozen base.
        w_lora_a_ = Matrix(dims_.d_hidden, dims_.lora_rank);
        w_lora_b_ = Matrix(dims_.lora_rank, dims_.context * dims_.d_embed);
        u_lora_a_ = Matrix(V, dims_.lora_rank);
        u_lora_b_ = Matrix(dims_.lora_rank, dims_.d_hidden);
        gaussian_init(w_lora_b_, rng, 0.1);
        gaussian_init(u_lora_b_, rng, 0.1);
        value_head_ = ValueHead(dims_.d_hidden);
    }

    static WordVocab build_vocab(const std::vector<std::vector<Message>>& samples) {
        WordVocab vocab;
        ReferenceTokenizer tok;
        for (const auto& messages : samples)
            for (const auto& m : messages)
                for (const auto& t : tok.tokenize(m.content)) vocab.add(t);
        return vocab;
    }

    const WordVocab& vocab() const { return vocab_; }
    const TinyLMDims& dims() const { return dims_; }
    ValueHead& value_head() { return value_head_; }
    const ValueHead& value_head() const { return value_head_; }

    // -------------------------------------------------------------------
    // rendering

    // Token stream: [<role>] content-tokens per message, <eos> after the
    // final message. Labels default to the next token; the mask covers the
    // tokens of the final assistant message (the elicitor utterance).
    RenderedSample render(const std::vector<Message>& messages, double rtg = 0.0) const {
        ReferenceTokenizer tok;
        RenderedSample s;
        std::size_t target_begin = 0, target_end = 0;
        for (std::size_t mi = 0; mi < messages.size(); ++mi) {
            s.tokens.push_back(WordVocab::role_marker(messages[mi].role));
            if (mi + 1 == messages.size()) target_begin = s.tokens.size();
            for (const auto& t : tok.tokenize(messages[mi].content))
                s.tokens.push_back(vocab_.lookup(t));
            if (mi + 1 == messages.size()) target_end = s.tokens.size();
        }
        s.tokens.push_back(WordVocab::kEos);
        s.eos_position = s.tokens.size() - 1;
        s.labels.assign(s.tokens.size(), WordVocab::kPad);
        s.mask.assign(s.tokens.size(), 0);
        for (std::size_t t = 0; t + 1 < s.tokens.size(); ++t) {
            s.labels[t] = s.tokens[t + 1];
            std::size_t predicted = t + 1;
            if (predicted >= target_begin && predicted < target_end) s.mask[t] = 1;
        }
        s.return_to_go = rtg;
        return s;
    }

    // -------------------------------------------------------------------
    // forward pass

    struct Forward {
        std::vector<std::vector<double>> input;     // concatenated context embeddings
        std::vector<std::vector<double>> hidden;    // tanh activations per position
        std::vector<std::vector<double>> log_probs; // log softmax per position
    };

    Forward forward(const std::vector<int>& tokens) const {
        const std::size_t V = vocab_.size();
        Forward f;
        f.input.resize(tokens.size());
        f.hidden.resize(tokens.size());
        f.log_probs.resize(tokens.size());
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            std::vector<double>& x = f.input[t];
            x.resize(dims_.context * dims_.d_embed);
            for (std::size_t j = 0; j < dims_.context; ++j) {
                long long pos = static_cast<long long>(t) - static_cast<long long>(dims_.context) + 1 +
                                static_cast<long long>(j);
                int id = pos < 0 ? WordVocab::kPad : tokens[static_cast<std::size_t>(pos)];
                for (std::size_t k = 0; k < dims_.d_embed; ++k)
                    x[j * dims_.d_embed + k] = embed_.at(static_cast<std::size_t>(id), k);
            }
            std::vector<double>& h = f.hidden[t];
            h.resize(dims_.d_hidden);
            std::vector<double> bx(dims_.lora_rank, 0.0);
            for (std::size_t r = 0; r < dims_.lora_rank; ++r)
                for (std::size_t c = 0; c < x.size(); ++c)
                    bx[r] += w_lora_b_.at(r, c) * x[c];
            for (std::size_t i = 0; i < dims_.d_hidden; ++i) {
                double z = b_base_.at(0, i);
                for (std::size_t c = 0; c < x.size(); ++c) z += w_base_.at(i, c) * x[c];
                for (std::size_t r = 0; r < dims_.lora_rank; ++r)
                    z += w_lora_a_.at(i, r) * bx[r];
                h[i] = std::tanh(z);
            }
            std::vector<double>& lp = f.log_probs[t];
            lp.resize(V);
            std::vector<double> bh(dims_.lora_rank, 0.0);
            for (std::size_t r = 0; r < dims_.lora_rank; ++r)
                for (std::size_t i = 0; i < dims_.d_hidden; ++i)
                    bh[r] += u_lora_b_.at(r, i) * h[i];
            double max_logit = -1e300;
            for (std::size_t v = 0; v < V; ++v) {
                double z = c_base_.at(0, v);
                for (std::size_t i = 0; i < dims_.d_hidden; ++i)
                    z += u_base_.at(v, i) * h[i];
                for (std::size_t r = 0; r < dims_.lora_rank; ++r)
                    z += u_lora_a_.at(v, r) * bh[r];
                lp[v] = z;
                max_logit = std::max(max_logit, z);
            }
            double lse = 0.0;
            for (double z : lp) lse += std::exp(z - max_logit);
            lse = max_logit + std::log(lse);
            for (double& z : lp) z -= lse;
        }
        return f;
    }

    // -------------------------------------------------------------------
    // LMScorer surface

    std::vector<double> score_target(const std::vector<Message>& messages) const override {
        RenderedSample s = render(messages);
        Forward f = forward(s.tokens);
        std::vector<double> out;
        for (std::size_t t = 0; t < s.tokens.size(); ++t)
            if (s.mask[t])
                out.push_back(f.log_probs[t][static_cast<std::size_t>(s.labels[t])]);
        return out;
    }

    std::string generate(const std::vector<Message>& context,
                         const DecodingParams& params) const override {
        std::vector<int> tokens;
        ReferenceTokenizer tok;
        for (const auto& m : context) {
            tokens.push_back(WordVocab::role_marker(m.role));
            for (const auto& t : tok.tokenize(m.content)) tokens.push_back(vocab_.lookup(t));
        }
        tokens.push_back(WordVocab::kAssistant);
        std::mt19937_64 rng(params.seed);
        std::string out;
        for (std::size_t step = 0; step < params.max_new_tokens; ++step) {
            Forward f = forward(tokens);
            const auto& lp = f.log_probs.back();
            int next;
            if (params.temperature <= 0.0) {
                next = 0;
                for (std::size_t v = 1; v < lp.size(); ++v)
                    if (lp[v] > lp[static_cast<std::size_t>(next)]) next = static_cast<int>(v);
            } else {
                std::vector<double> p(lp.size());
                double sum = 0.0;
                for (std::size_t v = 0; v < lp.size(); ++v)
                    sum += (p[v] = std::exp(lp[v] / params.temperature));
                double r = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * sum;
                next = static_cast<int>(lp.size()) - 1;
                double acc = 0.0;
                for (std::size_t v = 0; v < p.size(); ++v) {
                    acc += p[v];
                    if (r < acc) {
                        next = static_cast<int>(v);
                        break;
                    }
                }
            }
            if (next < WordVocab::kSpecialCount) break;  // eos or structural marker
            if (!out.empty()) out += " ";
            out += vocab_.token(next);
            tokens.push_back(next);
        }
        return out;
    }

    std::vector<double> hidden_state(const std::vector<Message>& messages) const override {
        RenderedSample s = render(messages);
        Forward f = forward(s.tokens);
        return f.hidden[s.eos_position];
    }

    std::string identity() const override {
        return "tiny-lm/ffn-d" + std::to_string(dims_.d_hidden) + "-r" +
               std::to_string(dims_.lora_rank);
    }

    // -------------------------------------------------------------------
    // frozen-base guarantee

    std::uint64_t base_checksum() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const Matrix& m) {
            for (double d : m.data) {
                std::uint64_t bits;
                std::memcpy(&bits, &d, sizeof(bits));
                h ^= bits;
                h *= 1099511628211ull;
            }
        };
        mix(embed_);
        mix(w_base_);
        mix(b_base_);
        mix(u_base_);
        mix(c_base_);
        return h;
    }

    // -------------------------------------------------------------------
    // serialization

    json to_json() const {
        auto mat = [](const Matrix& m) {
            json j;
            j["rows"] = m.rows;
            j["cols"] = m.cols;
            j["data"] = m.data;
            return j;
        };
        json j;
        j["vocab"] = vocab_.to_json();
        j["dims"] = {{"d_embed", dims_.d_embed},
                     {"d_hidden", dims_.d_hidden},
                     {"context", dims_.context},
                     {"lora_rank", dims_.lora_rank}};
        j["embed"] = mat(embed_);
        j["w_base"] = mat(w_base_);
        j["b_base"] = mat(b_base_);
        j["u_base"] = mat(u_base_);
        j["c_base"] = mat(c_base_);
        j["w_lora_a"] = mat(w_lora_a_);
        j["w_lora_b"] = mat(w_lora_b_);
        j["u_lora_a"] = mat(u_lora_a_);
        j["u_lora_b"] = mat(u_lora_b_);
        j["value_weight"] = value_head_.weight;
        j["value_bias"] = value_head_.bias;
        return j;
    }

    static TinyLM from_json(const json& j) {
        auto mat = [](const json& mj) {
            Matrix m(mj.at("rows").get<std::size_t>(), mj.at("cols").get<std::size_t>());
            m.data = mj.at("data").get<std::vector<double>>();
            return m;
        };
        TinyLM lm;
        lm.vocab_ = WordVocab::from_json(j.at("vocab"));
        lm.dims_.d_embed = j.at("dims").at("d_embed").get<std::size_t>();
        lm.dims_.d_hidden = j.at("dims").at("d_hidden").get<std::size_t>();
        lm.dims_.context = j.at("dims").at("context").get<std::size_t>();
        lm.dims_.lora_rank = j.at("dims").at("lora_rank").get<std::size_t>();
        lm.embed_ = mat(j.at("embed"));
        lm.w_base_ = mat(j.at("w_base"));
        lm.b_base_ = mat(j.at("b_base"));
        lm.u_base_ = mat(j.at("u_base"));
        lm.c_base_ = mat(j.at("c_base"));
        lm.w_lora_a_ = mat(j.at("w_lora_a"));
        lm.w_lora_b_ = mat(j.at("w_lora_b"));
        lm.u_lora_a_ = mat(j.at("u_lora_a"));
        lm.u_lora_b_ = mat(j.at("u_lora_b"));
        lm.value_head_ = ValueHead(lm.dims_.d_hidden);
        lm.value_head_.weight = j.at("value_weight").get<std::vector<double>>();
        lm.value_head_.bias = j.at("value_bias").get<double>();
        return lm;
    }

    const Matrix& u_base() const { return u_base_; }

    // adapter parameter access for the trainer
    Matrix& w_lora_a() { return w_lora_a_; }
    Matrix& w_lora_b() { return w_lora_b_; }
    Matrix& u_lora_a() { return u_lora_a_; }
    Matrix& u_lora_b() { return u_lora_b_; }
    const Matrix& w_lora_b() const { return w_lora_b_; }
    const Matrix& u_lora_b() const { return u_lora_b_; }
    const Matrix& w_lora_a() const { return w_lora_a_; }
    const Matrix& u_lora_a() const { return u_lora_a_; }

private:
    WordVocab vocab_;
    TinyLMDims dims_;
    Matrix embed_, w_base_, b_base_, u_base_, c_base_;      // frozen
    Matrix w_lora_a_, w_lora_b_, u_lora_a_, u_lora_b_;      // trainable
    ValueHead value_head_;                                   // trainable
};

}  // namespace elicit
