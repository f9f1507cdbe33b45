// Acceptance harness: numbered end-to-end checks over the whole library, one
// verdict line each, nonzero exit when any check fails. Unlike the unit
// suites these run the full benchmark at its shipped defaults, so expect a
// few minutes of wall time.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "orthogeo/adapters.hpp"
#include "orthogeo/analysis.hpp"
#include "orthogeo/bench.hpp"
#include "orthogeo/cli.hpp"
#include "orthogeo/config.hpp"
#include "orthogeo/linalg.hpp"
#include "orthogeo/matrix.hpp"
#include "orthogeo/metrics.hpp"
#include "orthogeo/optim.hpp"
#include "orthogeo/reparam.hpp"
#include "orthogeo/rng.hpp"
#include "orthogeo/train.hpp"

using namespace orthogeo;

namespace {

int g_failures = 0;

void verdict(int num, bool pass, const std::string& line) {
    std::printf("[%s] %2d. %s\n", pass ? "PASS" : "FAIL", num, line.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

template <typename F>
void check(int num, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        verdict(num, false, std::string("unexpected exception: ") + e.what());
    }
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = rng.normal(0.0, scale);
    return m;
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Orthonormality is maintained through a full-length default run.
// ---------------------------------------------------------------------------
void check_stiefel_feasibility() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.method = "orthogeo";
    cfg.early_stop = false;  // exercise the entire step budget
    const bench::TrainedRun run = bench::train(cfg);
    const double secs = seconds_since(t0);

    const bool pass = !run.aborted && run.steps_run == 3000 && run.stiefel_checks >= 31 &&
                      run.max_stiefel_residual <= 1e-10 && secs < 120.0;
    verdict(1, pass,
            fmt("constrained factors stay orthonormal over 3000 default-benchmark steps: "
                "max residual %.2e across %zu checks, %.1fs",
                run.max_stiefel_residual, run.stiefel_checks, secs));
}

// ---------------------------------------------------------------------------
// 2. Every analytic backward pass agrees with central finite differences.
// ---------------------------------------------------------------------------
void check_gradients() {
    const std::vector<cli::GradCheckCase> cases = cli::gradcheck_battery(7);
    bool pass = !cases.empty();
    double max_err = 0.0;
    std::string worst;
    for (const auto& c : cases) {
        max_err = std::max(max_err, c.max_err);
        if (c.max_err > c.tol) {
            pass = false;
            worst = c.name;
        }
    }
    std::string line = fmt("analytic gradients match finite differences in all %zu maps: "
                           "max relative error %.2e",
                           cases.size(), max_err);
    if (!worst.empty()) line += " (out of tolerance: " + worst + ")";
    verdict(2, pass, line);
}

// ---------------------------------------------------------------------------
// 3. Best rank-r fit recovers the truncated SVD of a dense target.
// ---------------------------------------------------------------------------
std::optional<adapters::OrthoGeoAdapter> fit_low_rank_target() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 20, r = 4, steps = 4000;

    Rng rng(42);
    DenseMatrix target(n, n);
    for (double& v : target.data) v = rng.normal();

    const DenseVector spectrum = linalg::svd_jacobi(target).s;
    double tail = 0.0;
    for (std::size_t i = r; i < spectrum.size(); ++i) tail += spectrum[i] * spectrum[i];
    const double best_error = std::sqrt(tail);

    adapters::OrthoGeoAdapter ad =
        adapters::make_orthogeo(DenseMatrix(n, n), r, static_cast<double>(r),
                                reparam::SigmaMode::Direct, 1e-6, 0.0, adapters::ThetaInit::Normal,
                                rng);
    const DenseMatrix eye = DenseMatrix::identity(n);
    optim::AdamState opt;
    opt.lr = 2e-2;
    opt.weight_decay = 0.0;

    for (std::size_t step = 1; step <= steps; ++step) {
        auto [y, cache] = adapters::ortho_forward(ad, eye);
        DenseMatrix grad_y(n, n);
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            grad_y.data[i] = 2.0 * (y.data[i] - target.data[i]);
        }
        reparam::ParamGrads g = adapters::ortho_backward(ad, cache, grad_y);
        const std::vector<optim::TensorBinding> binds{
            {"theta_a", ad.params.theta_a.data.data(), g.g_theta_a.data.data(),
             ad.params.theta_a.data.size(), false},
            {"theta_b", ad.params.theta_b.data.data(), g.g_theta_b.data.data(),
             ad.params.theta_b.data.size(), false},
            {"s", ad.params.s.data(), g.g_s.data(), ad.params.s.size(), false},
        };
        optim::adamw_step(binds, opt);
    }

    const DenseMatrix delta = adapters::delta_matrix(ad);
    double sq = 0.0;
    for (std::size_t i = 0; i < delta.data.size(); ++i) {
        const double diff = delta.data[i] - target.data[i];
        sq += diff * diff;
    }
    const double achieved = std::sqrt(sq);
    const double gap = achieved / best_error - 1.0;

    const DenseVector learned = adapters::delta_spectrum(ad);
    double sigma_diff = 0.0;
    for (std::size_t i = 0; i < r; ++i) sigma_diff = std::max(sigma_diff, std::abs(learned[i] - spectrum[i]));

    const double secs = seconds_since(t0);
    const bool pass = gap <= 0.01 && sigma_diff <= 1e-2 && secs < 30.0;
    verdict(3, pass,
            fmt("rank-4 fit of a 20x20 target lands on the truncated SVD: residual gap %.4f%%, "
                "max gain error %.2e, %.1fs",
                100.0 * gap, sigma_diff, secs));
    if (!pass) return std::nullopt;
    return ad;
}

// ---------------------------------------------------------------------------
// 4. The composed update has numerical rank exactly r while all gains live.
// ---------------------------------------------------------------------------
std::size_t numerical_rank(const DenseMatrix& m) {
    const DenseVector s = linalg::svd_jacobi(m).s;
    const double tol = 1e-10 * (s.empty() ? 0.0 : s.front());
    std::size_t n = 0;
    for (double v : s) n += v > tol ? 1 : 0;
    return n;
}

void check_update_rank(const std::optional<adapters::OrthoGeoAdapter>& fitted) {
    // Hand-built adapter with gains spread over two orders of magnitude.
    Rng rng(55);
    adapters::OrthoGeoAdapter ad =
        adapters::make_orthogeo(DenseMatrix(16, 12), 5, 5.0, reparam::SigmaMode::Direct, 1e-6, 0.0,
                                adapters::ThetaInit::Normal, rng);
    ad.params.s = {1.5, 0.9, 0.35, -0.6, 0.02};

    double min_gain = 1e300;
    for (double v : adapters::delta_spectrum(ad)) min_gain = std::min(min_gain, v);
    const std::size_t fresh_rank = numerical_rank(adapters::delta_matrix(ad));

    bool pass = min_gain > ad.params.epsilon && fresh_rank == 5;
    std::string line = fmt("composed update has numerical rank r: hand-built 16x12 r=5 -> %zu",
                           fresh_rank);
    if (fitted.has_value()) {
        const std::size_t trained_rank = numerical_rank(adapters::delta_matrix(*fitted));
        pass = pass && trained_rank == fitted->rank;
        line += fmt(", trained 20x20 r=%zu -> %zu", fitted->rank, trained_rank);
    } else {
        pass = false;
        line += ", trained adapter unavailable";
    }
    verdict(4, pass, line);
}

// ---------------------------------------------------------------------------
// 5. The baseline factorization is gauge-free; the constrained one is not.
// ---------------------------------------------------------------------------
void check_gauge() {
    Rng rng(77);
    const std::size_t d_in = 11, d_out = 9, r = 3;
    adapters::LoraAdapter lora = adapters::make_lora(random_matrix(d_out, d_in, rng), r, 6.0, rng);
    lora.b = random_matrix(d_out, r, rng, 0.5);

    adapters::OrthoGeoAdapter og =
        adapters::make_orthogeo(random_matrix(d_out, d_in, rng), r, 6.0, reparam::SigmaMode::Softplus,
                                1e-6, 0.2, adapters::ThetaInit::Normal, rng);
    const reparam::ManifoldFactors factors = reparam::build_factors(og.params);

    const DenseMatrix x = random_matrix(d_in, 6, rng);
    const DenseMatrix y_ref = adapters::lora_forward(lora, x).first;

    double worst_invariance = 0.0;
    double min_residual = 1e300;
    for (int trial = 0; trial < 10; ++trial) {
        DenseMatrix m = DenseMatrix::identity(r);
        add_scaled(m, random_matrix(r, r, rng), 0.5);
        const DenseMatrix m_inv = linalg::solve(m, DenseMatrix::identity(r));

        adapters::LoraAdapter moved = lora;
        moved.b = matmul(lora.b, m);
        moved.a = matmul(lora.a, transpose(m_inv));
        const DenseMatrix y = adapters::lora_forward(moved, x).first;
        worst_invariance = std::max(worst_invariance, max_abs(subtract(y, y_ref)));

        // The same reparameterization knocks a frame off the manifold.
        min_residual = std::min(min_residual, linalg::stiefel_residual(matmul(factors.a, m)));
    }

    const bool pass = worst_invariance <= 1e-10 && min_residual > 1e-3;
    verdict(5, pass,
            fmt("factor rescaling is invisible to the baseline (worst drift %.2e) but breaks the "
                "constrained frames (min residual %.2e)",
                worst_invariance, min_residual));
}

// ---------------------------------------------------------------------------
// 6. Folding the update into the base weight preserves the forward map.
// ---------------------------------------------------------------------------
void check_fold() {
    Rng rng(88);
    const std::size_t d_in = 14, d_out = 13;
    const DenseMatrix w0 = random_matrix(d_out, d_in, rng, 0.3);

    adapters::OrthoGeoAdapter og = adapters::make_orthogeo(
        w0, 4, 8.0, reparam::SigmaMode::Softplus, 1e-6, 0.3, adapters::ThetaInit::Normal, rng);
    adapters::LoraAdapter lora = adapters::make_lora(w0, 4, 8.0, rng);
    lora.b = random_matrix(d_out, 4, rng, 0.5);

    const DenseMatrix og_folded = adapters::fold(og).w_eff;
    const DenseMatrix lora_folded = adapters::fold(lora).w_eff;

    const auto rel_gap = [](const DenseVector& y, const DenseVector& z) {
        DenseVector diff = y;
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= z[i];
        return norm2(diff) / norm2(z);
    };

    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        DenseVector x(d_in);
        for (double& v : x) v = rng.normal();
        worst = std::max(worst, rel_gap(adapters::ortho_forward(og, x).first, matvec(og_folded, x)));
        worst = std::max(worst, rel_gap(adapters::lora_forward(lora, x).first, matvec(lora_folded, x)));
    }
    verdict(6, worst <= 1e-10,
            fmt("folded weights reproduce the adapter forward pass on 100 inputs: worst relative "
                "error %.2e",
                worst));
}

// ---------------------------------------------------------------------------
// 7. Trainable parameter counts match the closed-form budget.
// ---------------------------------------------------------------------------
void check_param_counts() {
    struct Case {
        std::uint64_t d_in, d_out, r;
    };
    const std::vector<Case> cases{{384, 384, 8}, {64, 64, 8}, {100, 50, 4}, {9, 7, 3}, {1, 1, 1}};
    bool pass = true;
    for (const Case& c : cases) {
        const std::uint64_t og =
            adapters::param_count(adapters::AdapterKind::OrthoGeo, c.d_in, c.d_out, c.r);
        const std::uint64_t lo = adapters::param_count(adapters::AdapterKind::Lora, c.d_in, c.d_out, c.r);
        const std::uint64_t full = adapters::param_count(adapters::AdapterKind::Full, c.d_in, c.d_out, 0);
        pass = pass && og == c.r * (c.d_in + c.d_out) + c.r;
        pass = pass && lo == c.r * (c.d_in + c.d_out);
        pass = pass && full == c.d_in * c.d_out;
    }
    const std::uint64_t reference =
        adapters::param_count(adapters::AdapterKind::OrthoGeo, 384, 384, 8);
    pass = pass && reference == 6152;
    verdict(7, pass, fmt("parameter budgets match closed forms on %zu shapes; (384,384,r=8) -> %llu",
                         cases.size(), static_cast<unsigned long long>(reference)));
}

// ---------------------------------------------------------------------------
// 8. Default benchmark, five seeds per method: constrained updates must meet
//    or beat the baseline on mean test MRR and recall@3.
// ---------------------------------------------------------------------------
struct MethodRuns {
    std::vector<bench::TrainedRun> runs;
    double mean_mrr = 0.0;
    double mean_r3 = 0.0;
};

MethodRuns run_benchmark(const std::string& method) {
    MethodRuns out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RunConfig cfg;
        cfg.method = method;
        cfg.seed = seed;
        out.runs.push_back(bench::train(cfg));
        out.mean_mrr += out.runs.back().test_metrics.mrr;
        out.mean_r3 += out.runs.back().test_metrics.recall_at.at(3);
    }
    out.mean_mrr /= 5.0;
    out.mean_r3 /= 5.0;
    return out;
}

void check_benchmark(MethodRuns& lora, MethodRuns& og) {
    const auto t0 = std::chrono::steady_clock::now();
    lora = run_benchmark("lora");
    og = run_benchmark("orthogeo");
    const double secs = seconds_since(t0);

    std::printf("    seed   lora mrr         orthogeo mrr     lora r@3         orthogeo r@3\n");
    for (std::size_t i = 0; i < 5; ++i) {
        std::printf("    %-6zu %-16.12f %-16.12f %-16.12f %-16.12f\n", i + 1,
                    lora.runs[i].test_metrics.mrr, og.runs[i].test_metrics.mrr,
                    lora.runs[i].test_metrics.recall_at.at(3),
                    og.runs[i].test_metrics.recall_at.at(3));
    }
    std::printf("    mean   %-16.12f %-16.12f %-16.12f %-16.12f\n", lora.mean_mrr, og.mean_mrr,
                lora.mean_r3, og.mean_r3);

    bool clean = true;
    for (const auto& r : lora.runs) clean = clean && !r.aborted;
    for (const auto& r : og.runs) clean = clean && !r.aborted;

    const bool pass = clean && og.mean_mrr >= lora.mean_mrr && og.mean_r3 >= lora.mean_r3 &&
                      secs < 1200.0;
    verdict(8, pass,
            fmt("five-seed default benchmark: mean test MRR %.6f (constrained) vs %.6f (baseline), "
                "mean recall@3 %.6f vs %.6f, %.0fs",
                og.mean_mrr, lora.mean_mrr, og.mean_r3, lora.mean_r3, secs));
}

// ---------------------------------------------------------------------------
// 9. Spectrum health: no rank collapse relative to the baseline, and the
//    internal gains agree with an SVD of the composed update.
// ---------------------------------------------------------------------------
void check_spectra(const MethodRuns& lora, const MethodRuns& og) {
    if (lora.runs.empty() || og.runs.empty()) {
        verdict(9, false, "spectrum check skipped: benchmark runs unavailable");
        return;
    }
    double er_lora = 0.0, er_og = 0.0, worst_sigma_diff = 0.0;
    for (const auto& run : lora.runs) {
        const auto& ad = std::get<adapters::LoraAdapter>(run.encoder.model);
        er_lora += analysis::effective_rank(adapters::delta_spectrum(ad));
    }
    for (const auto& run : og.runs) {
        const auto& ad = std::get<adapters::OrthoGeoAdapter>(run.encoder.model);
        const DenseVector internal = adapters::delta_spectrum(ad);
        er_og += analysis::effective_rank(internal);

        const DenseVector svd = linalg::svd_jacobi(adapters::delta_matrix(ad)).s;
        for (std::size_t i = 0; i < internal.size(); ++i) {
            worst_sigma_diff = std::max(worst_sigma_diff, std::abs(internal[i] - svd[i]));
        }
    }
    er_lora /= static_cast<double>(lora.runs.size());
    er_og /= static_cast<double>(og.runs.size());

    const bool pass = er_og >= er_lora && worst_sigma_diff <= 1e-8;
    verdict(9, pass,
            fmt("trained update spectra: effective rank %.3f (constrained) vs %.3f (baseline); "
                "internal gains match the composed update's SVD to %.2e",
                er_og, er_lora, worst_sigma_diff));
}

// ---------------------------------------------------------------------------
// 10. Retrieval metrics: hand-checked values and a from-scratch oracle.
// ---------------------------------------------------------------------------
void check_metrics() {
    // Gold ranks 1, 2, 4 across four candidates.
    DenseMatrix scores = DenseMatrix::from_rows(
        {{0.9, 0.1, 0.2, 0.3}, {0.8, 0.5, 0.1, 0.2}, {0.7, 0.6, 0.5, 0.4}});
    const metrics::RankedRun run = metrics::make_ranked_run(scores, {0, 1, 3});
    bool pass = std::abs(metrics::mrr(run) - 0.5833333333333334) <= 1e-12;
    pass = pass && std::abs(metrics::recall_at_k(run, 1) - 1.0 / 3.0) <= 1e-12;
    pass = pass && std::abs(metrics::recall_at_k(run, 3) - 2.0 / 3.0) <= 1e-12;
    pass = pass && std::abs(metrics::ndcg_at_k(run, 3) - 0.5436432511904858) <= 1e-12;
    pass = pass && metrics::recall_at_k(run, 50) == 1.0;

    // From-scratch re-computation on a 10-concept dataset: embed with the
    // public encoder, then rank and score with nothing but counting loops.
    RunConfig cfg;
    cfg.method = "orthogeo";
    cfg.sigma_mode = "direct";
    cfg.s_init = 0.4;
    cfg.d_feat = 16;
    cfg.d_emb = 16;
    cfg.rank = 3;
    cfg.depth = 1;
    cfg.branching = 9;
    cfg.per_concept = 6;
    cfg.seed = 23;
    cfg.finalize();

    const bench::ConceptTree tree =
        bench::generate_taxonomy(cfg.depth, cfg.branching, cfg.d_feat, cfg.seed, cfg.gamma);
    const bench::RetrievalDataset ds =
        bench::generate_descriptions(tree, cfg.per_concept, cfg.noise, cfg.mix, cfg.seed);
    const bench::BiEncoder enc = bench::make_encoder(cfg);
    const metrics::MetricsReport rep = metrics::evaluate(enc, ds, {1, 3});

    std::vector<DenseVector> cand;
    for (const auto& c : ds.candidates) cand.push_back(bench::encode(enc, c));
    double mrr = 0.0, r1 = 0.0, r3 = 0.0, n1 = 0.0, n3 = 0.0;
    for (const auto& ex : ds.examples) {
        const DenseVector q = bench::encode(enc, ex.description);
        std::vector<double> score(cand.size(), 0.0);
        for (std::size_t j = 0; j < cand.size(); ++j) score[j] = dot(q, cand[j]);
        std::size_t rank = 1;
        for (std::size_t j = 0; j < cand.size(); ++j) {
            if (j == ex.concept_id) continue;
            if (score[j] > score[ex.concept_id]) ++rank;
            if (score[j] == score[ex.concept_id] && j < ex.concept_id) ++rank;
        }
        mrr += 1.0 / static_cast<double>(rank);
        r1 += rank <= 1 ? 1.0 : 0.0;
        r3 += rank <= 3 ? 1.0 : 0.0;
        n1 += rank <= 1 ? 1.0 : 0.0;  // single gold: ndcg@1 == recall@1
        n3 += rank <= 3 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    }
    const double n = static_cast<double>(ds.examples.size());
    double worst = std::abs(rep.mrr - mrr / n);
    worst = std::max(worst, std::abs(rep.recall_at.at(1) - r1 / n));
    worst = std::max(worst, std::abs(rep.recall_at.at(3) - r3 / n));
    worst = std::max(worst, std::abs(rep.ndcg_at.at(1) - n1 / n));
    worst = std::max(worst, std::abs(rep.ndcg_at.at(3) - n3 / n));
    pass = pass && worst <= 1e-12;

    verdict(10, pass,
            fmt("metrics agree with hand values and a from-scratch oracle on %zu queries: worst "
                "deviation %.2e",
                ds.examples.size(), worst));
}

// ---------------------------------------------------------------------------
// 11. Replaying a run manifest reproduces every artifact byte for byte.
// ---------------------------------------------------------------------------
void check_reproducibility() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "orthogeo_acceptance";
    const fs::path dir_a = root / "run_a";
    const fs::path dir_b = root / "run_b";
    fs::remove_all(root);

    RunConfig cfg;
    cfg.method = "orthogeo";
    cfg.d_feat = 16;
    cfg.d_emb = 16;
    cfg.rank = 4;
    cfg.alpha = 8.0;
    cfg.depth = 2;
    cfg.branching = 3;
    cfg.per_concept = 12;
    cfg.batch_size = 24;
    cfg.lr = 1e-3;
    cfg.max_steps = 40;
    cfg.eval_interval = 10;
    cfg.early_stop = false;
    cfg.seed = 6;

    std::ostringstream sink_out, sink_err;
    const int rc_a = cli::run_train(cfg, dir_a.string(), true, sink_out, sink_err);
    const RunConfig replay = config_io::load_config((dir_a / "manifest.json").string());
    const int rc_b = cli::run_train(replay, dir_b.string(), true, sink_out, sink_err);

    bool pass = rc_a == 0 && rc_b == 0;
    std::string mismatch;
    for (const char* name :
         {"checkpoint.json", "metrics.csv", "spectrum.csv", "convergence.csv", "manifest.json"}) {
        const std::string a = config_io::read_file((dir_a / name).string());
        const std::string b = config_io::read_file((dir_b / name).string());
        if (a != b || a.empty()) {
            pass = false;
            mismatch = name;
        }
    }
    fs::remove_all(root);

    std::string line = "manifest replay reproduces checkpoint, metrics, spectrum, and convergence "
                       "artifacts byte for byte";
    if (!mismatch.empty()) line += " (differs: " + mismatch + ")";
    verdict(11, pass, line);
}

}  // namespace

int main() {
    std::printf("acceptance checks\n=================\n");

    check(1, [] { check_stiefel_feasibility(); });
    check(2, [] { check_gradients(); });

    std::optional<adapters::OrthoGeoAdapter> fitted;
    check(3, [&] { fitted = fit_low_rank_target(); });
    check(4, [&] { check_update_rank(fitted); });

    check(5, [] { check_gauge(); });
    check(6, [] { check_fold(); });
    check(7, [] { check_param_counts(); });

    MethodRuns lora, og;
    check(8, [&] { check_benchmark(lora, og); });
    check(9, [&] { check_spectra(lora, og); });

    check(10, [] { check_metrics(); });
    check(11, [] { check_reproducibility(); });

    if (g_failures == 0) {
        std::printf("all acceptance checks passed\n");
        return 0;
    }
    std::printf("%d acceptance check(s) failed\n", g_failures);
    return 1;
}
