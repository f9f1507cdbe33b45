#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "orthogeo/bench.hpp"
#include "orthogeo/config.hpp"
#include "orthogeo/errors.hpp"
#include "orthogeo/metrics.hpp"
#include "orthogeo/optim.hpp"

namespace orthogeo::bench {

struct TrainLogRow {
    std::size_t step = 0;
    double train_loss = 0.0;
    double val_mrr = 0.0;
};

struct TrainedRun {
    RunConfig config;
    BiEncoder encoder;
    RetrievalDataset dataset;
    metrics::MetricsReport val_metrics;
    metrics::MetricsReport test_metrics;
    std::vector<TrainLogRow> log;
    std::size_t steps_run = 0;
    bool stopped_early = false;
    bool aborted = false;
    std::string abort_reason;
    // Orthonormality drift of the constrained factors, sampled every 100
    // steps; stays at machine precision because the frames are rebuilt from
    // scratch each forward pass.
    double max_stiefel_residual = 0.0;
    std::size_t stiefel_checks = 0;
};

namespace detail {

struct ParamSnapshot {
    std::vector<std::vector<double>> tensors;
    optim::AdamState opt;
};

// The mutable tensors of whichever adapter the encoder holds, in binding
// order. Gain parameters are exempt from weight decay.
inline std::vector<optim::TensorBinding> bindings_for(BiEncoder& enc, const DenseMatrix& grads_a,
                                                      const DenseMatrix& grads_b, const DenseVector& grads_s) {
    std::vector<optim::TensorBinding> out;
    if (auto* og = std::get_if<adapters::OrthoGeoAdapter>(&enc.model)) {
        out.push_back({"theta_a", og->params.theta_a.data.data(), grads_a.data.data(), og->params.theta_a.data.size(), true});
        out.push_back({"theta_b", og->params.theta_b.data.data(), grads_b.data.data(), og->params.theta_b.data.size(), true});
        out.push_back({"s", og->params.s.data(), grads_s.data(), og->params.s.size(), false});
    } else if (auto* lora = std::get_if<adapters::LoraAdapter>(&enc.model)) {
        out.push_back({"a", lora->a.data.data(), grads_a.data.data(), lora->a.data.size(), true});
        out.push_back({"b", lora->b.data.data(), grads_b.data.data(), lora->b.data.size(), true});
    }
    return out;
}

inline ParamSnapshot snapshot(const BiEncoder& enc, const optim::AdamState& opt) {
    ParamSnapshot snap;
    if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&enc.model)) {
        snap.tensors = {og->params.theta_a.data, og->params.theta_b.data, og->params.s};
    } else if (const auto* lora = std::get_if<adapters::LoraAdapter>(&enc.model)) {
        snap.tensors = {lora->a.data, lora->b.data};
    }
    snap.opt = opt;
    return snap;
}

inline void restore(BiEncoder& enc, optim::AdamState& opt, const ParamSnapshot& snap) {
    if (auto* og = std::get_if<adapters::OrthoGeoAdapter>(&enc.model)) {
        og->params.theta_a.data = snap.tensors[0];
        og->params.theta_b.data = snap.tensors[1];
        og->params.s = snap.tensors[2];
    } else if (auto* lora = std::get_if<adapters::LoraAdapter>(&enc.model)) {
        lora->a.data = snap.tensors[0];
        lora->b.data = snap.tensors[1];
    }
    opt = snap.opt;
}

// One training batch: query columns, the deduplicated candidate columns for
// the batch's gold concepts, and each query's index into those candidates.
struct TrainBatch {
    DenseMatrix queries;
    DenseMatrix candidates;
    std::vector<std::size_t> gold_cols;
};

inline TrainBatch assemble_batch(const RetrievalDataset& ds, const std::vector<std::size_t>& example_ids) {
    std::vector<std::size_t> concepts;
    concepts.reserve(example_ids.size());
    for (std::size_t id : example_ids) concepts.push_back(ds.examples[id].concept_id);
    std::vector<std::size_t> unique = concepts;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    TrainBatch batch;
    batch.queries = DenseMatrix(ds.d_feat, example_ids.size());
    for (std::size_t j = 0; j < example_ids.size(); ++j) {
        const auto& desc = ds.examples[example_ids[j]].description;
        for (std::size_t i = 0; i < ds.d_feat; ++i) batch.queries(i, j) = desc[i];
    }
    batch.candidates = DenseMatrix(ds.d_feat, unique.size());
    for (std::size_t j = 0; j < unique.size(); ++j) {
        for (std::size_t i = 0; i < ds.d_feat; ++i) batch.candidates(i, j) = ds.candidates[unique[j]][i];
    }
    batch.gold_cols.resize(example_ids.size());
    for (std::size_t j = 0; j < example_ids.size(); ++j) {
        batch.gold_cols[j] =
            static_cast<std::size_t>(std::lower_bound(unique.begin(), unique.end(), concepts[j]) - unique.begin());
    }
    return batch;
}

struct StepResult {
    double loss = 0.0;
    DenseMatrix grad_raw;  // cotangent on the stacked pre-normalization outputs
    ForwardBatch forward;
};

// Loss and (optionally) gradients for one batch. Queries and candidates are
// pushed through the encoder in a single stacked forward pass so one adapter
// cache serves the whole step.
inline StepResult batch_loss(const BiEncoder& enc, const TrainBatch& batch, bool want_grads) {
    const std::size_t nb = batch.queries.cols;
    const std::size_t nc = batch.candidates.cols;
    DenseMatrix stacked(batch.queries.rows, nb + nc);
    for (std::size_t i = 0; i < stacked.rows; ++i) {
        for (std::size_t j = 0; j < nb; ++j) stacked(i, j) = batch.queries(i, j);
        for (std::size_t j = 0; j < nc; ++j) stacked(i, nb + j) = batch.candidates(i, j);
    }

    StepResult res;
    res.forward = encode_batch(enc, stacked);

    DenseMatrix q_emb(res.forward.unit.rows, nb);
    DenseMatrix c_emb(res.forward.unit.rows, nc);
    for (std::size_t i = 0; i < res.forward.unit.rows; ++i) {
        for (std::size_t j = 0; j < nb; ++j) q_emb(i, j) = res.forward.unit(i, j);
        for (std::size_t j = 0; j < nc; ++j) c_emb(i, j) = res.forward.unit(i, nb + j);
    }

    InfoNceResult nce = infonce_loss(q_emb, c_emb, batch.gold_cols, enc.tau);
    res.loss = nce.loss;
    if (want_grads) {
        DenseMatrix grad_unit(res.forward.unit.rows, nb + nc);
        for (std::size_t i = 0; i < grad_unit.rows; ++i) {
            for (std::size_t j = 0; j < nb; ++j) grad_unit(i, j) = nce.grad_queries(i, j);
            for (std::size_t j = 0; j < nc; ++j) grad_unit(i, nb + j) = nce.grad_candidates(i, j);
        }
        res.grad_raw = normalize_backward(res.forward, grad_unit);
    }
    return res;
}

}  // namespace detail

inline BiEncoder make_encoder(const RunConfig& cfg) {
    DenseMatrix w0 = make_base_weight(cfg.d_emb, cfg.d_feat, cfg.seed);
    BiEncoder enc;
    enc.tau = cfg.tau;
    if (cfg.method == "none") {
        enc.model = std::move(w0);
        return enc;
    }
    Rng rng = Rng::stream(cfg.seed, streams::kAdapter);
    if (cfg.method == "orthogeo") {
        const auto mode = cfg.sigma_mode == "direct" ? reparam::SigmaMode::Direct : reparam::SigmaMode::Softplus;
        const auto init = cfg.theta_init == "kaiming" ? adapters::ThetaInit::KaimingUniform : adapters::ThetaInit::Normal;
        enc.model = adapters::make_orthogeo(std::move(w0), cfg.rank, cfg.alpha, mode, cfg.epsilon,
                                            cfg.s_init, init, rng);
    } else {
        enc.model = adapters::make_lora(std::move(w0), cfg.rank, cfg.alpha, rng);
    }
    return enc;
}

// Full benchmark run: generate data, initialize the encoder, optimize with
// AdamW, track validation MRR, and score the final parameters. method "none"
// skips optimization and reports the zero-shot encoder.
inline TrainedRun train(RunConfig cfg) {
    cfg.finalize();

    TrainedRun run;
    run.config = cfg;

    const ConceptTree tree = generate_taxonomy(cfg.depth, cfg.branching, cfg.d_feat, cfg.seed, cfg.gamma);
    run.dataset = generate_descriptions(tree, cfg.per_concept, cfg.noise, cfg.mix, cfg.seed);
    run.encoder = make_encoder(cfg);

    const RetrievalDataset train_ds = subset(run.dataset, Split::Train);
    const RetrievalDataset val_ds = subset(run.dataset, Split::Val);
    const std::vector<std::size_t> ks{1, 3};

    optim::AdamState opt;
    opt.lr = cfg.lr;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.eps_adam;
    opt.weight_decay = cfg.weight_decay;

    const bool trainable = cfg.method != "none";
    auto* og = std::get_if<adapters::OrthoGeoAdapter>(&run.encoder.model);

    auto check_stiefel = [&]() {
        if (og == nullptr) return;
        const reparam::ManifoldFactors f = reparam::build_factors(og->params);
        const double res = std::max(linalg::stiefel_residual(f.a), linalg::stiefel_residual(f.b));
        run.max_stiefel_residual = std::max(run.max_stiefel_residual, res);
        run.stiefel_checks += 1;
    };

    std::vector<std::size_t> order(train_ds.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffler = Rng::stream(cfg.seed, streams::kShuffle);
    shuffler.shuffle(order);
    std::size_t cursor = 0;

    auto next_batch_ids = [&]() {
        std::vector<std::size_t> ids;
        ids.reserve(std::min(cfg.batch_size, order.size()));
        while (ids.size() < cfg.batch_size) {
            if (cursor == order.size()) {
                shuffler.shuffle(order);
                cursor = 0;
                if (!ids.empty()) break;  // keep epochs from blending into one batch
            }
            ids.push_back(order[cursor++]);
        }
        return ids;
    };

    detail::ParamSnapshot last_good = detail::snapshot(run.encoder, opt);
    double best_val_mrr = -1.0;
    std::size_t stall = 0;

    if (trainable && !train_ds.examples.empty()) {
        // Step-0 log row: loss of the upcoming first batch, no update applied.
        {
            std::vector<std::size_t> first(order.begin(), order.begin() + std::min(cfg.batch_size, order.size()));
            const auto probe = detail::batch_loss(run.encoder, detail::assemble_batch(train_ds, first), false);
            run.log.push_back({0, probe.loss, metrics::evaluate(run.encoder, val_ds, ks).mrr});
        }
        check_stiefel();

        for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
            const auto ids = next_batch_ids();
            const detail::TrainBatch batch = detail::assemble_batch(train_ds, ids);
            double loss = 0.0;
            try {
                const detail::StepResult sr = detail::batch_loss(run.encoder, batch, true);
                loss = sr.loss;
                if (!std::isfinite(loss)) throw NumericError("train: non-finite loss");

                DenseMatrix g_a, g_b;
                DenseVector g_s;
                if (og != nullptr) {
                    const auto& cache = std::get<adapters::OrthoCache>(sr.forward.cache);
                    reparam::ParamGrads g = adapters::ortho_backward(*og, cache, sr.grad_raw);
                    g_a = std::move(g.g_theta_a);
                    g_b = std::move(g.g_theta_b);
                    g_s = std::move(g.g_s);
                } else {
                    auto& lora = std::get<adapters::LoraAdapter>(run.encoder.model);
                    const auto& cache = std::get<adapters::LoraCache>(sr.forward.cache);
                    adapters::LoraGrads g = adapters::lora_backward(lora, cache, sr.grad_raw);
                    g_a = std::move(g.g_a);
                    g_b = std::move(g.g_b);
                }
                const auto binds = detail::bindings_for(run.encoder, g_a, g_b, g_s);
                optim::adamw_step(binds, opt);
            } catch (const NumericError& e) {
                detail::restore(run.encoder, opt, last_good);
                run.aborted = true;
                run.abort_reason = e.what();
                break;
            }
            run.steps_run = step;

            if (step % 100 == 0) check_stiefel();

            if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
                const double val_mrr = metrics::evaluate(run.encoder, val_ds, ks).mrr;
                run.log.push_back({step, loss, val_mrr});
                last_good = detail::snapshot(run.encoder, opt);
                if (val_mrr >= best_val_mrr + cfg.min_improve) {
                    stall = 0;
                } else {
                    stall += 1;
                }
                best_val_mrr = std::max(best_val_mrr, val_mrr);
                if (cfg.early_stop && stall >= cfg.patience) {
                    run.stopped_early = true;
                    break;
                }
            }
        }
        check_stiefel();
    }

    run.val_metrics = metrics::evaluate(run.encoder, val_ds, ks);
    run.test_metrics = metrics::evaluate(run.encoder, subset(run.dataset, Split::Test), ks);
    return run;
}

}  // namespace orthogeo::bench
