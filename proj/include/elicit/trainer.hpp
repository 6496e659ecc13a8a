#pragma once
// Offline policy optimization over annotated blocks: AWR with a jointly
// trained value head against the tiny LM. Only the adapter matrices and the
// value head receive updates; the base weights stay frozen.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "elicit/metrics.hpp"
#include "elicit/reward.hpp"
#include "elicit/segmentation.hpp"
#include "elicit/tiny_lm.hpp"
#include "elicit/training.hpp"

namespace elicit {

struct AdamState {
    std::vector<double> m, v;
    std::size_t step = 0;

    void ensure(std::size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
    }

    void update(std::vector<double>& params, const std::vector<double>& grad, double lr,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ensure(params.size());
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

struct StepRecord {
    std::size_t step = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double weight_min = 0.0;
    double weight_mean = 0.0;
    double weight_max = 0.0;
    bool skipped = false;
};

struct TrainingLog {
    std::vector<StepRecord> steps;
    std::vector<std::pair<std::size_t, double>> dev_micro_ppl;  // (epoch, ppl)
    std::vector<std::string> warnings;
};

// Mini-batch view of the policy-training data: rendered sequences with
// target-token masks, returns-to-go and the derived AWR quantities.
struct WeightedBatch {
    std::vector<RenderedSample> samples;
    std::vector<double> returns_to_go;
    std::vector<double> value_predictions;
    std::vector<double> advantages;
    std::vector<double> weights;
};

class TinyLMTrainer {
public:
    TinyLMTrainer(TinyLM& model, AWRConfig cfg) : model_(model), cfg_(cfg) {
        cfg_.validate();
    }

    const AWRConfig& config() const { return cfg_; }

    // One gradient step on L = L_pi + L_v. The value loss treats hidden
    // states as constants, so the critic gradient touches psi only.
    StepRecord combined_step(const std::vector<RenderedSample>& batch) {
        StepRecord rec;
        rec.step = ++global_step_;
        if (batch.empty()) throw std::invalid_argument("empty batch");

        const std::size_t B = batch.size();
        const TinyLMDims& dims = model_.dims();
        const std::size_t V = model_.vocab().size();

        WeightedBatch wb;
        wb.samples = batch;
        std::vector<TinyLM::Forward> forwards;
        std::vector<std::vector<double>> eos_hidden;
        forwards.reserve(B);
        for (const auto& s : batch) {
            forwards.push_back(model_.forward(s.tokens));
            eos_hidden.push_back(forwards.back().hidden[s.eos_position]);
            wb.returns_to_go.push_back(s.return_to_go);
            wb.value_predictions.push_back(model_.value_head().predict(eos_hidden.back()));
        }
        wb.advantages = compute_advantages(wb.returns_to_go, wb.value_predictions);
        wb.weights = compute_weights(wb.advantages, cfg_);

        rec.weight_min = *std::min_element(wb.weights.begin(), wb.weights.end());
        rec.weight_max = *std::max_element(wb.weights.begin(), wb.weights.end());
        rec.weight_mean = 0.0;
        for (double w : wb.weights) rec.weight_mean += w;
        rec.weight_mean /= static_cast<double>(B);

        // losses
        std::vector<std::vector<double>> masked_lps(B);
        std::size_t masked_total = 0;
        for (std::size_t i = 0; i < B; ++i) {
            const auto& s = batch[i];
            for (std::size_t t = 0; t < s.tokens.size(); ++t)
                if (s.mask[t]) {
                    masked_lps[i].push_back(
                        forwards[i].log_probs[t][static_cast<std::size_t>(s.labels[t])]);
                    ++masked_total;
                }
        }
        if (masked_total == 0) throw std::invalid_argument("batch has zero masked tokens");
        rec.policy_loss = policy_loss(wb.weights, masked_lps);
        rec.value_loss = value_loss(wb.value_predictions, wb.returns_to_go);

        if (!std::isfinite(rec.policy_loss) || !std::isfinite(rec.value_loss)) {
            rec.skipped = true;
            if (++consecutive_failures_ >= cfg_.max_consecutive_failures)
                throw std::runtime_error("training aborted: " +
                                         std::to_string(consecutive_failures_) +
                                         " consecutive non-finite losses");
            return rec;
        }
        consecutive_failures_ = 0;

        // gradients
        Matrix g_wa(dims.d_hidden, dims.lora_rank);
        Matrix g_wb(dims.lora_rank, dims.context * dims.d_embed);
        Matrix g_ua(V, dims.lora_rank);
        Matrix g_ub(dims.lora_rank, dims.d_hidden);
        const double inv_b = 1.0 / static_cast<double>(B);

        std::vector<double> dlogits(V), bh(dims.lora_rank), bx(dims.lora_rank);
        std::vector<double> dh(dims.d_hidden), dz(dims.d_hidden), at_dl(dims.lora_rank),
            at_dz(dims.lora_rank);

        for (std::size_t i = 0; i < B; ++i) {
            const auto& s = batch[i];
            const auto& f = forwards[i];
            const double scale = wb.weights[i] * inv_b;
            for (std::size_t t = 0; t < s.tokens.size(); ++t) {
                if (!s.mask[t]) continue;
                const auto& lp = f.log_probs[t];
                const auto& h = f.hidden[t];
                const auto& x = f.input[t];
                for (std::size_t v = 0; v < V; ++v) dlogits[v] = std::exp(lp[v]) * scale;
                dlogits[static_cast<std::size_t>(s.labels[t])] -= scale;

                // output adapter
                std::fill(bh.begin(), bh.end(), 0.0);
                for (std::size_t r = 0; r < dims.lora_rank; ++r)
                    for (std::size_t k = 0; k < dims.d_hidden; ++k)
                        bh[r] += model_.u_lora_b().at(r, k) * h[k];
                std::fill(at_dl.begin(), at_dl.end(), 0.0);
                for (std::size_t v = 0; v < V; ++v)
                    for (std::size_t r = 0; r < dims.lora_rank; ++r)
                        at_dl[r] += model_.u_lora_a().at(v, r) * dlogits[v];
                for (std::size_t v = 0; v < V; ++v)
                    for (std::size_t r = 0; r < dims.lora_rank; ++r)
                        g_ua.at(v, r) += dlogits[v] * bh[r];
                for (std::size_t r = 0; r < dims.lora_rank; ++r)
                    for (std::size_t k = 0; k < dims.d_hidden; ++k)
                        g_ub.at(r, k) += at_dl[r] * h[k];

                // back into the hidden layer
                for (std::size_t k = 0; k < dims.d_hidden; ++k) {
                    double acc = 0.0;
                    for (std::size_t v = 0; v < V; ++v)
                        acc += model_.u_base().at(v, k) * dlogits[v];
                    for (std::size_t r = 0; r < dims.lora_rank; ++r)
                        acc += model_.u_lora_b().at(r, k) * at_dl[r];
                    dh[k] = acc;
                    dz[k] = acc * (1.0 - h[k] * h[k]);
                }

                // hidden adapter
                std::fill(bx.begin(), bx.end(), 0.0);
                for (std::size_t r = 0; r < dims.lora_rank; ++r)
                    for (std::size_t c = 0; c < x.size(); ++c)
                        bx[r] += model_.w_lora_b().at(r, c) * x[c];
                std::fill(at_dz.begin(), at_dz.end(), 0.0);
                for (std::size_t k = 0; k < dims.d_hidden; ++k)
                    for (std::size_t r = 0; r < dims.lora_rank; ++r)
                        at_dz[r] += model_.w_lora_a().at(k, r) * dz[k];
                for (std::size_t k = 0; k < dims.d_hidden; ++k)
                    for (std::size_t r = 0; r < dims.lora_rank; ++r)
                        g_wa.at(k, r) += dz[k] * bx[r];
                for (std::size_t r = 0; r < dims.lora_rank; ++r)
                    for (std::size_t c = 0; c < x.size(); ++c)
                        g_wb.at(r, c) += at_dz[r] * x[c];
            }
        }

        std::vector<double> g_vw;
        double g_vb = 0.0;
        model_.value_head().value_loss_grad(eos_hidden, wb.returns_to_go, g_vw, g_vb);

        adam_wa_.update(model_.w_lora_a().data, g_wa.data, cfg_.learning_rate);
        adam_wb_.update(model_.w_lora_b().data, g_wb.data, cfg_.learning_rate);
        adam_ua_.update(model_.u_lora_a().data, g_ua.data, cfg_.learning_rate);
        adam_ub_.update(model_.u_lora_b().data, g_ub.data, cfg_.learning_rate);
        adam_vw_.update(model_.value_head().weight, g_vw, cfg_.learning_rate);
        std::vector<double> vb{model_.value_head().bias}, gvb{g_vb};
        adam_vb_.update(vb, gvb, cfg_.learning_rate);
        model_.value_head().bias = vb[0];
        return rec;
    }

    // Epochs of seeded-shuffled mini-batches with a dev perplexity probe at
    // each epoch boundary.
    TrainingLog train(const std::vector<Block>& train_blocks,
                      const std::vector<Block>& dev_blocks,
                      const SegmentationConfig& scfg) {
        if (train_blocks.empty()) throw std::invalid_argument("empty train split");
        TrainingLog log;
        std::vector<RenderedSample> samples;
        samples.reserve(train_blocks.size());
        for (const auto& b : train_blocks)
            samples.push_back(model_.render(render_block_messages(b, scfg), b.return_to_go));

        std::mt19937_64 rng(cfg_.seed);
        std::vector<std::size_t> order(samples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            fisher_yates(order, rng);
            for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
                std::vector<RenderedSample> batch;
                for (std::size_t i = start;
                     i < std::min(start + cfg_.batch_size, order.size()); ++i)
                    batch.push_back(samples[order[i]]);
                log.steps.push_back(combined_step(batch));
            }
            if (!dev_blocks.empty()) {
                try {
                    log.dev_micro_ppl.emplace_back(epoch,
                                                   dev_micro_perplexity(dev_blocks, scfg));
                } catch (const std::exception& e) {
                    log.warnings.push_back(std::string("dev evaluation failed: ") + e.what());
                }
            }
        }
        return log;
    }

    // Micro perplexity of the real elicitor targets under the current model.
    double dev_micro_perplexity(const std::vector<Block>& blocks,
                                const SegmentationConfig& scfg) const {
        std::vector<std::vector<double>> scored;
        for (const auto& b : blocks)
            scored.push_back(model_.score_target(render_block_messages(b, scfg)));
        return micro_perplexity(scored);
    }

private:
    TinyLM& model_;
    AWRConfig cfg_;
    std::size_t global_step_ = 0;
    std::size_t consecutive_failures_ = 0;
    AdamState adam_wa_, adam_wb_, adam_ua_, adam_ub_, adam_vw_, adam_vb_;
};

// ---------------------------------------------------------------------------
// adapter artifact directory

inline void save_training_artifact(const std::filesystem::path& dir, const TinyLM& model,
                                   const AWRConfig& cfg, const TrainingLog& log,
                                   const std::string& split_manifest_hash) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "model.json");
        if (!out) throw IoError("cannot write model artifact");
        out << model.to_json().dump();
    }
    {
        json j;
        j["temperature"] = cfg.temperature;
        j["alpha"] = cfg.alpha;
        j["gamma"] = cfg.gamma;
        j["weight_max"] = cfg.weight_max;
        j["batch_size"] = cfg.batch_size;
        j["learning_rate"] = cfg.learning_rate;
        j["epochs"] = cfg.epochs;
        j["seed"] = cfg.seed;
        j["split_manifest_hash"] = split_manifest_hash;
        std::ofstream out(dir / "config.json");
        out << j.dump(2);
    }
    {
        std::ofstream out(dir / "training_log.jsonl");
        for (const auto& s : log.steps) {
            json j;
            j["step"] = s.step;
            j["policy_loss"] = s.policy_loss;
            j["value_loss"] = s.value_loss;
            j["weight_min"] = s.weight_min;
            j["weight_mean"] = s.weight_mean;
            j["weight_max"] = s.weight_max;
            j["skipped"] = s.skipped;
            out << j.dump() << "\n";
        }
        for (const auto& [epoch, ppl] : log.dev_micro_ppl) {
            json j;
            j["epoch"] = epoch;
            j["dev_micro_ppl"] = ppl;
            out << j.dump() << "\n";
        }
    }
}

inline TinyLM load_training_artifact(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw IoError("cannot open model artifact: " + (dir / "model.json").string());
    json j;
    in >> j;
    return TinyLM::from_json(j);
}

}  // namespace elicit
