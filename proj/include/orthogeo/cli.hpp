#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "orthogeo/analysis.hpp"
#include "orthogeo/bench.hpp"
#include "orthogeo/checkpoint.hpp"
#include "orthogeo/config.hpp"
#include "orthogeo/errors.hpp"
#include "orthogeo/metrics.hpp"
#include "orthogeo/optim.hpp"
#include "orthogeo/train.hpp"

namespace orthogeo::cli {

// Exit-code convention shared by every subcommand:
//   0 success, 1 check failure, 2 input error, 3 runtime abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitAborted = 3;

// ---------------------------------------------------------------------------
// Small parsing / formatting helpers
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (ch != ' ' && ch != '\t') {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

inline std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    for (const std::string& p : split_list(text)) {
        if (p.empty()) throw ConfigError(std::string(what) + ": empty entry in list '" + text + "'");
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(p, &used);
            if (used != p.size()) throw std::invalid_argument(p);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw ConfigError(std::string(what) + ": '" + p + "' is not a non-negative integer");
        }
    }
    return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (std::size_t v : parse_size_list(text, "seeds")) out.push_back(static_cast<std::uint64_t>(v));
    return out;
}

// Applies a command-line "key=value" override on top of a config.
inline void apply_override(RunConfig& cfg, const std::string& pair) {
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + pair + "' is not key=value");
    }
    config_io::apply_text_pair(cfg, pair.substr(0, eq), pair.substr(eq + 1));
}

inline bench::Split parse_split(const std::string& name) {
    if (name == "train") return bench::Split::Train;
    if (name == "val") return bench::Split::Val;
    if (name == "test") return bench::Split::Test;
    throw ConfigError("split must be train, val, or test; got '" + name + "'");
}

inline std::string metrics_csv_header(const std::vector<std::size_t>& ks, bool with_split) {
    std::string h = "method";
    if (with_split) h += ",split";
    h += ",mrr";
    for (std::size_t k : ks) h += ",recall@" + std::to_string(k);
    for (std::size_t k : ks) h += ",ndcg@" + std::to_string(k);
    return h + "\n";
}

inline std::string metrics_csv_row(const std::string& method, const std::string& split,
                                   const metrics::MetricsReport& rep, const std::vector<std::size_t>& ks) {
    std::string row = method;
    if (!split.empty()) row += "," + split;
    row += "," + analysis::format_double(rep.mrr);
    for (std::size_t k : ks) row += "," + analysis::format_double(rep.recall_at.at(k));
    for (std::size_t k : ks) row += "," + analysis::format_double(rep.ndcg_at.at(k));
    return row + "\n";
}

inline nlohmann::json metrics_to_json(const metrics::MetricsReport& rep) {
    nlohmann::json recall, ndcg;
    for (const auto& [k, v] : rep.recall_at) recall[std::to_string(k)] = v;
    for (const auto& [k, v] : rep.ndcg_at) ndcg[std::to_string(k)] = v;
    return nlohmann::json{
        {"mrr", rep.mrr}, {"recall", recall}, {"ndcg", ndcg}, {"n_queries", rep.n_queries}};
}

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

// Runs the benchmark and writes the run directory: manifest.json (config and
// results; feeding it back as --config replays the run), convergence.csv,
// metrics.csv, checkpoint.json, and spectrum.csv when the trained update is
// not identically zero.
inline int run_train(const RunConfig& cfg_in, const std::string& out_dir, bool quiet,
                     std::ostream& out, std::ostream& err) {
    bench::TrainedRun run = bench::train(cfg_in);
    const RunConfig& cfg = run.config;  // finalized copy

    if (!quiet) {
        for (const auto& row : run.log) {
            char line[128];
            std::snprintf(line, sizeof(line), "step=%zu loss=%.6f val_mrr=%.4f", row.step,
                          row.train_loss, row.val_mrr);
            out << line << "\n";
        }
    }

    ensure_directory(out_dir);
    const std::vector<std::size_t> ks{1, 3};

    std::uint64_t trainable = 0;
    if (cfg.method == "orthogeo") {
        trainable = adapters::param_count(adapters::AdapterKind::OrthoGeo, cfg.d_feat, cfg.d_emb, cfg.rank);
    } else if (cfg.method == "lora") {
        trainable = adapters::param_count(adapters::AdapterKind::Lora, cfg.d_feat, cfg.d_emb, cfg.rank);
    }

    nlohmann::json manifest{
        {"config", config_io::to_json(cfg)},
        {"results",
         nlohmann::json{
             {"steps_run", run.steps_run},
             {"stopped_early", run.stopped_early},
             {"aborted", run.aborted},
             {"abort_reason", run.abort_reason},
             {"max_stiefel_residual", run.max_stiefel_residual},
             {"stiefel_checks", run.stiefel_checks},
             {"params",
              nlohmann::json{{"trainable", trainable},
                             {"full_layer", adapters::param_count(adapters::AdapterKind::Full,
                                                                  cfg.d_feat, cfg.d_emb, 0)}}},
             {"val", metrics_to_json(run.val_metrics)},
             {"test", metrics_to_json(run.test_metrics)},
         }},
    };
    config_io::write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");

    std::string conv = "step,train_loss,val_mrr\n";
    for (const auto& row : run.log) {
        conv += std::to_string(row.step) + "," + analysis::format_double(row.train_loss) + "," +
                analysis::format_double(row.val_mrr) + "\n";
    }
    config_io::write_file(out_dir + "/convergence.csv", conv);

    std::string mcsv = metrics_csv_header(ks, true);
    mcsv += metrics_csv_row(cfg.method, "val", run.val_metrics, ks);
    mcsv += metrics_csv_row(cfg.method, "test", run.test_metrics, ks);
    config_io::write_file(out_dir + "/metrics.csv", mcsv);

    io::save_checkpoint(out_dir + "/checkpoint.json", io::Checkpoint{cfg, run.encoder, std::nullopt});

    analysis::SpectrumRecord rec;
    if (analysis::spectrum_record_for(run.encoder, cfg.method, rec, &err)) {
        config_io::write_file(out_dir + "/spectrum.csv", analysis::spectrum_csv({rec}));
    }

    if (run.aborted) {
        err << "training aborted at step " << run.steps_run << ": " << run.abort_reason
            << " (last-good checkpoint written)\n";
        return kExitAborted;
    }

    char summary[256];
    std::snprintf(summary, sizeof(summary),
                  "done: method=%s steps=%zu early_stop=%s val_mrr=%.4f test_mrr=%.4f",
                  cfg.method.c_str(), run.steps_run, run.stopped_early ? "yes" : "no",
                  run.val_metrics.mrr, run.test_metrics.mrr);
    out << summary << "\n";
    out << "wrote " << out_dir << "/{manifest.json, convergence.csv, metrics.csv, checkpoint.json}\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

// Regenerates the dataset from the config stored in the checkpoint and
// scores the requested split. Prints one CSV row; optionally writes it too.
inline int run_eval(const std::string& checkpoint_path, const std::string& split_name,
                    const std::vector<std::size_t>& ks, const std::string& out_csv,
                    std::ostream& out) {
    if (ks.empty()) throw ConfigError("eval: at least one cutoff k is required");
    for (std::size_t k : ks) {
        if (k == 0) throw ConfigError("eval: cutoffs must be positive");
    }
    const io::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
    const RunConfig& cfg = ckpt.config;

    const bench::ConceptTree tree =
        bench::generate_taxonomy(cfg.depth, cfg.branching, cfg.d_feat, cfg.seed, cfg.gamma);
    const bench::RetrievalDataset ds =
        bench::generate_descriptions(tree, cfg.per_concept, cfg.noise, cfg.mix, cfg.seed);
    const bench::RetrievalDataset part = bench::subset(ds, parse_split(split_name));

    const metrics::MetricsReport rep = metrics::evaluate(ckpt.encoder, part, ks);
    const std::string csv = metrics_csv_header(ks, false) + metrics_csv_row(cfg.method, "", rep, ks);
    out << csv;
    if (!out_csv.empty()) config_io::write_file(out_csv, csv);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradCheckCase {
    std::string name;
    double max_err = 0.0;
    double tol = 0.0;
};

namespace detail {

inline std::vector<double> pack_theta(const reparam::EuclideanParams& p) {
    std::vector<double> flat;
    flat.reserve(p.theta_a.data.size() + p.theta_b.data.size() + p.s.size());
    flat.insert(flat.end(), p.theta_a.data.begin(), p.theta_a.data.end());
    flat.insert(flat.end(), p.theta_b.data.begin(), p.theta_b.data.end());
    flat.insert(flat.end(), p.s.begin(), p.s.end());
    return flat;
}

inline std::vector<double> pack_grads(const reparam::ParamGrads& g) {
    std::vector<double> flat;
    flat.insert(flat.end(), g.g_theta_a.data.begin(), g.g_theta_a.data.end());
    flat.insert(flat.end(), g.g_theta_b.data.begin(), g.g_theta_b.data.end());
    flat.insert(flat.end(), g.g_s.begin(), g.g_s.end());
    return flat;
}

// Rebuilds Euclidean parameters from a flat vector laid out by pack_theta.
inline reparam::EuclideanParams unpack_theta(std::span<const double> flat,
                                             const reparam::EuclideanParams& like) {
    reparam::EuclideanParams p = like;
    std::size_t at = 0;
    for (double& v : p.theta_a.data) v = flat[at++];
    for (double& v : p.theta_b.data) v = flat[at++];
    for (double& v : p.s) v = flat[at++];
    return p;
}

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = rng.normal(0.0, scale);
    return m;
}

}  // namespace detail

// Finite-difference oracle suite over every differentiable map in the
// library, on small seeded instances. Central differences with step h; each
// case probes up to 20 coordinates. Returns one entry per case so callers
// can enforce per-map tolerances.
inline std::vector<GradCheckCase> gradcheck_battery(std::uint64_t seed, double h = 1e-6) {
    std::vector<GradCheckCase> cases;
    constexpr std::size_t kProbes = 20;

    // Frame map: loss = <G, orth_map(theta)> over a few shapes.
    {
        const std::vector<std::pair<std::size_t, std::size_t>> shapes{{6, 2}, {10, 3}, {12, 4}};
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            const auto [d, r] = shapes[i];
            Rng rng = Rng::stream(seed, 100 + i);
            const DenseMatrix theta = detail::random_matrix(d, r, rng);
            const DenseMatrix g_frame = detail::random_matrix(d, r, rng);
            auto loss = [&](std::span<const double> flat) {
                DenseMatrix t(d, r);
                std::copy(flat.begin(), flat.end(), t.data.begin());
                const DenseMatrix q = reparam::orth_map(t);
                double acc = 0.0;
                for (std::size_t j = 0; j < q.data.size(); ++j) acc += q.data[j] * g_frame.data[j];
                return acc;
            };
            const DenseMatrix analytic = reparam::orth_map_vjp(theta, g_frame);
            const double err = optim::grad_check(loss, theta.data, analytic.data, kProbes, h, seed + i);
            cases.push_back({"orth_map " + std::to_string(d) + "x" + std::to_string(r), err, 1e-5});
        }
    }

    // Gain map, both modes: loss = <g, sigma_map(s)>.
    for (const auto mode : {reparam::SigmaMode::Softplus, reparam::SigmaMode::Direct}) {
        Rng rng = Rng::stream(seed, mode == reparam::SigmaMode::Softplus ? 110 : 111);
        const std::size_t r = 8;
        DenseVector s(r), g_sigma(r);
        for (double& v : s) v = rng.normal();
        for (double& v : g_sigma) v = rng.normal();
        auto loss = [&](std::span<const double> flat) {
            const DenseVector sigma = reparam::sigma_map(DenseVector(flat.begin(), flat.end()), mode, 1e-6);
            double acc = 0.0;
            for (std::size_t i = 0; i < r; ++i) acc += sigma[i] * g_sigma[i];
            return acc;
        };
        const DenseVector analytic = reparam::sigma_map_vjp(s, mode, g_sigma);
        const double err = optim::grad_check(loss, s, analytic, kProbes, h, seed);
        cases.push_back({std::string("sigma_map ") + reparam::to_string(mode), err, 1e-8});
    }

    // Constrained adapter backward: loss = <G, forward(params, X)>.
    {
        Rng rng = Rng::stream(seed, 120);
        const std::size_t d_in = 10, d_out = 8, r = 3, n = 4;
        adapters::OrthoGeoAdapter ad =
            adapters::make_orthogeo(detail::random_matrix(d_out, d_in, rng), r, 16.0,
                                    reparam::SigmaMode::Softplus, 1e-6, 0.3,
                                    adapters::ThetaInit::Normal, rng);
        const DenseMatrix x = detail::random_matrix(d_in, n, rng);
        const DenseMatrix g_y = detail::random_matrix(d_out, n, rng);
        auto loss = [&](std::span<const double> flat) {
            adapters::OrthoGeoAdapter probe = ad;
            probe.params = detail::unpack_theta(flat, ad.params);
            const DenseMatrix y = adapters::ortho_forward(probe, x).first;
            double acc = 0.0;
            for (std::size_t j = 0; j < y.data.size(); ++j) acc += y.data[j] * g_y.data[j];
            return acc;
        };
        const auto cache = adapters::ortho_forward(ad, x).second;
        const std::vector<double> flat = detail::pack_theta(ad.params);
        const std::vector<double> analytic = detail::pack_grads(adapters::ortho_backward(ad, cache, g_y));
        const double err = optim::grad_check(loss, flat, analytic, kProbes, h, seed);
        cases.push_back({"adapter backward (constrained)", err, 1e-5});
    }

    // Baseline adapter backward.
    {
        Rng rng = Rng::stream(seed, 121);
        const std::size_t d_in = 10, d_out = 8, r = 3, n = 4;
        adapters::LoraAdapter ad = adapters::make_lora(detail::random_matrix(d_out, d_in, rng), r, 16.0, rng);
        ad.b = detail::random_matrix(d_out, r, rng, 0.5);  // move off the zero init so g_a is informative
        const DenseMatrix x = detail::random_matrix(d_in, n, rng);
        const DenseMatrix g_y = detail::random_matrix(d_out, n, rng);
        auto loss = [&](std::span<const double> flat) {
            adapters::LoraAdapter probe = ad;
            std::size_t at = 0;
            for (double& v : probe.a.data) v = flat[at++];
            for (double& v : probe.b.data) v = flat[at++];
            const DenseMatrix y = adapters::lora_forward(probe, x).first;
            double acc = 0.0;
            for (std::size_t j = 0; j < y.data.size(); ++j) acc += y.data[j] * g_y.data[j];
            return acc;
        };
        const auto cache = adapters::lora_forward(ad, x).second;
        std::vector<double> flat(ad.a.data);
        flat.insert(flat.end(), ad.b.data.begin(), ad.b.data.end());
        const adapters::LoraGrads g = adapters::lora_backward(ad, cache, g_y);
        std::vector<double> analytic(g.g_a.data);
        analytic.insert(analytic.end(), g.g_b.data.begin(), g.g_b.data.end());
        const double err = optim::grad_check(loss, flat, analytic, kProbes, h, seed);
        cases.push_back({"adapter backward (baseline)", err, 1e-5});
    }

    // Contrastive loss gradients on both embedding sides.
    {
        Rng rng = Rng::stream(seed, 122);
        const std::size_t d = 6, nb = 5, nc = 7;
        DenseMatrix q = detail::random_matrix(d, nb, rng);
        DenseMatrix c = detail::random_matrix(d, nc, rng);
        for (std::size_t j = 0; j < nb; ++j) {
            DenseVector col = column_of(q, j);
            bench::normalize_in_place(col, "gradcheck");
            for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i];
        }
        for (std::size_t j = 0; j < nc; ++j) {
            DenseVector col = column_of(c, j);
            bench::normalize_in_place(col, "gradcheck");
            for (std::size_t i = 0; i < d; ++i) c(i, j) = col[i];
        }
        std::vector<std::size_t> gold(nb);
        for (std::size_t i = 0; i < nb; ++i) gold[i] = rng.bounded(nc);
        const double tau = 0.05;

        auto loss = [&](std::span<const double> flat) {
            DenseMatrix qq(d, nb), cc(d, nc);
            std::copy(flat.begin(), flat.begin() + static_cast<long>(d * nb), qq.data.begin());
            std::copy(flat.begin() + static_cast<long>(d * nb), flat.end(), cc.data.begin());
            return bench::infonce_loss(qq, cc, gold, tau).loss;
        };
        const bench::InfoNceResult res = bench::infonce_loss(q, c, gold, tau);
        std::vector<double> flat(q.data);
        flat.insert(flat.end(), c.data.begin(), c.data.end());
        std::vector<double> analytic(res.grad_queries.data);
        analytic.insert(analytic.end(), res.grad_candidates.data.begin(), res.grad_candidates.data.end());
        const double err = optim::grad_check(loss, flat, analytic, kProbes, h, seed);
        cases.push_back({"infonce", err, 1e-5});
    }

    // Full composition: encoder forward, L2 normalization, contrastive loss,
    // pulled all the way back to the flat Euclidean parameters.
    {
        Rng rng = Rng::stream(seed, 123);
        const std::size_t d_feat = 12, d_emb = 10, r = 3, nb = 6, nc = 4;
        bench::BiEncoder enc;
        enc.tau = 0.05;
        enc.model = adapters::make_orthogeo(detail::random_matrix(d_emb, d_feat, rng, 0.3), r, 16.0,
                                            reparam::SigmaMode::Softplus, 1e-6, 0.3,
                                            adapters::ThetaInit::Normal, rng);
        const DenseMatrix stacked = detail::random_matrix(d_feat, nb + nc, rng);
        std::vector<std::size_t> gold(nb);
        for (std::size_t i = 0; i < nb; ++i) gold[i] = rng.bounded(nc);

        auto eval_loss = [&](const bench::BiEncoder& e, bench::ForwardBatch* fb_out,
                             bench::InfoNceResult* nce_out) {
            bench::ForwardBatch fb = bench::encode_batch(e, stacked);
            DenseMatrix q(d_emb, nb), c(d_emb, nc);
            for (std::size_t i = 0; i < d_emb; ++i) {
                for (std::size_t j = 0; j < nb; ++j) q(i, j) = fb.unit(i, j);
                for (std::size_t j = 0; j < nc; ++j) c(i, j) = fb.unit(i, nb + j);
            }
            bench::InfoNceResult nce = bench::infonce_loss(q, c, gold, e.tau);
            const double loss = nce.loss;
            if (fb_out != nullptr) *fb_out = std::move(fb);
            if (nce_out != nullptr) *nce_out = std::move(nce);
            return loss;
        };

        auto& ad = std::get<adapters::OrthoGeoAdapter>(enc.model);
        auto loss = [&](std::span<const double> flat) {
            bench::BiEncoder probe = enc;
            std::get<adapters::OrthoGeoAdapter>(probe.model).params = detail::unpack_theta(flat, ad.params);
            return eval_loss(probe, nullptr, nullptr);
        };

        bench::ForwardBatch fb;
        bench::InfoNceResult nce;
        eval_loss(enc, &fb, &nce);
        DenseMatrix grad_unit(d_emb, nb + nc);
        for (std::size_t i = 0; i < d_emb; ++i) {
            for (std::size_t j = 0; j < nb; ++j) grad_unit(i, j) = nce.grad_queries(i, j);
            for (std::size_t j = 0; j < nc; ++j) grad_unit(i, nb + j) = nce.grad_candidates(i, j);
        }
        const DenseMatrix grad_raw = bench::normalize_backward(fb, grad_unit);
        const auto& cache = std::get<adapters::OrthoCache>(fb.cache);
        const std::vector<double> flat = detail::pack_theta(ad.params);
        const std::vector<double> analytic =
            detail::pack_grads(adapters::ortho_backward(ad, cache, grad_raw));
        const double err = optim::grad_check(loss, flat, analytic, kProbes, h, seed);
        cases.push_back({"full composition", err, 1e-5});
    }

    return cases;
}

inline int run_gradcheck(std::uint64_t seed, std::ostream& out) {
    const std::vector<GradCheckCase> cases = gradcheck_battery(seed);
    const GradCheckCase* worst = nullptr;
    bool failed = false;
    double max_err = 0.0;
    for (const auto& c : cases) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-32s max_err=%.3e tol=%.0e %s", c.name.c_str(), c.max_err,
                      c.tol, c.max_err <= c.tol ? "ok" : "FAIL");
        out << line << "\n";
        max_err = std::max(max_err, c.max_err);
        failed = failed || c.max_err > c.tol;
        if (worst == nullptr || c.max_err / c.tol > worst->max_err / worst->tol) worst = &c;
    }
    out << "max relative error: " << analysis::format_double(max_err) << "\n";
    if (failed) {
        out << "worst offender: " << worst->name << " (max_err=" << analysis::format_double(worst->max_err)
            << ", tol=" << analysis::format_double(worst->tol) << ")\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

// Emits one long-format CSV covering every checkpoint given, plus a summary
// line per record. CSV goes to out_csv if set, otherwise to `out`.
inline int run_spectrum(const std::vector<std::string>& checkpoint_paths, const std::string& out_csv,
                        std::ostream& out, std::ostream& err) {
    if (checkpoint_paths.empty()) throw ConfigError("spectrum: at least one checkpoint required");
    std::vector<analysis::SpectrumRecord> records;
    for (const std::string& path : checkpoint_paths) {
        const io::Checkpoint ckpt = io::load_checkpoint(path);
        analysis::SpectrumRecord rec;
        if (analysis::spectrum_record_for(ckpt.encoder, ckpt.config.method, rec, &err)) {
            records.push_back(std::move(rec));
        }
    }
    for (const auto& rec : records) {
        err << rec.method << " r=" << rec.rank
            << " effective_rank=" << analysis::format_double(rec.effective_rank)
            << " stable_rank=" << analysis::format_double(rec.stable_rank) << "\n";
    }
    const std::string csv = analysis::spectrum_csv(records);
    if (!out_csv.empty()) {
        config_io::write_file(out_csv, csv);
    } else {
        out << csv;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

inline int run_ablate(const RunConfig& base, const std::vector<std::size_t>& ranks,
                      const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                      const std::string& out_csv, std::ostream& out, std::ostream& err) {
    out << "ablation grid: 2 methods x " << ranks.size() << " ranks x " << seeds.size() << " seeds = "
        << 2 * ranks.size() * seeds.size() << " runs\n";
    const analysis::AblationResult result = analysis::rank_ablation(base, ranks, seeds, jobs);
    config_io::write_file(out_csv, analysis::ablation_csv(result));

    out << "method,r,mean_mrr\n";
    for (const auto& rec : result.records) {
        out << rec.method << "," << rec.rank << "," << analysis::format_double(rec.mean_mrr) << "\n";
    }
    bool any_failed = false;
    for (const auto& cell : result.cells) {
        if (cell.failed) {
            any_failed = true;
            err << "cell method=" << cell.method << " r=" << cell.rank << " seed=" << cell.seed
                << " failed: " << cell.error << "\n";
        }
    }
    out << "wrote " << out_csv << "\n";
    return any_failed ? kExitAborted : kExitOk;
}

}  // namespace orthogeo::cli
