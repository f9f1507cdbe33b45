#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "orthogeo/bench.hpp"
#include "orthogeo/metrics.hpp"
#include "orthogeo/rng.hpp"
#include "orthogeo/train.hpp"

using namespace orthogeo;
using metrics::RankedRun;

namespace {

// Scores crafted so gold ranks are 1, 2 and 4 over four candidates.
DenseMatrix ranked_scores() {
    return DenseMatrix::from_rows({{0.9, 0.1, 0.2, 0.3},    // gold 0 at rank 1
                                   {0.8, 0.5, 0.1, 0.2},    // gold 1 at rank 2
                                   {0.7, 0.6, 0.5, 0.4}});  // gold 3 at rank 4
}

const std::vector<std::size_t> kGold{0, 1, 3};

TEST(Mrr, HandValues) {
    const RankedRun run = metrics::make_ranked_run(ranked_scores(), kGold);
    EXPECT_NEAR(metrics::mrr(run), 0.5833333333333334, 1e-12);

    // Gold always first.
    const RankedRun perfect = metrics::make_ranked_run(
        DenseMatrix::from_rows({{1.0, 0.0}, {1.0, 0.5}}), {0, 0});
    EXPECT_DOUBLE_EQ(metrics::mrr(perfect), 1.0);

    // Gold always last among 100 candidates.
    DenseMatrix worst(2, 100);
    for (std::size_t q = 0; q < 2; ++q) {
        for (std::size_t j = 0; j < 100; ++j) worst(q, j) = 100.0 - static_cast<double>(j);
    }
    const RankedRun last = metrics::make_ranked_run(worst, {99, 99});
    EXPECT_NEAR(metrics::mrr(last), 0.01, 1e-15);
}

TEST(RecallAtK, HandValues) {
    const RankedRun run = metrics::make_ranked_run(ranked_scores(), kGold);
    EXPECT_NEAR(metrics::recall_at_k(run, 1), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(metrics::recall_at_k(run, 3), 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(metrics::recall_at_k(run, 4), 1.0);
    EXPECT_DOUBLE_EQ(metrics::recall_at_k(run, 50), 1.0);  // k beyond candidate count
}

TEST(NdcgAtK, HandValues) {
    const RankedRun run = metrics::make_ranked_run(ranked_scores(), kGold);
    // Per query: rank 1 -> 1, rank 2 -> 1/log2(3), rank 4 -> outside cutoff.
    EXPECT_NEAR(metrics::ndcg_at_k(run, 3), 0.5436432511904858, 1e-12);

    const RankedRun rank2 = metrics::make_ranked_run(
        DenseMatrix::from_rows({{0.9, 0.8, 0.1}}), {1});
    EXPECT_NEAR(metrics::ndcg_at_k(rank2, 3), 0.6309297535714574, 1e-12);
    EXPECT_DOUBLE_EQ(metrics::ndcg_at_k(rank2, 1), 0.0);
}

TEST(RankedRun, TieBreaksByAscendingId) {
    // All-equal scores: the ranking must be the identity permutation.
    DenseMatrix flat(1, 5);
    for (std::size_t j = 0; j < 5; ++j) flat(0, j) = 0.25;
    const RankedRun run = metrics::make_ranked_run(flat, {2});
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(run.queries[0].ranking[j], j);
    EXPECT_NEAR(metrics::mrr(run), 1.0 / 3.0, 1e-15);
}

TEST(Report, InvariantsAcrossKAndQueryOrder) {
    Rng rng(17);
    DenseMatrix scores(8, 12);
    for (double& v : scores.data) v = rng.normal();
    std::vector<std::size_t> gold;
    for (std::size_t q = 0; q < 8; ++q) gold.push_back(rng.bounded(12));

    const RankedRun run = metrics::make_ranked_run(scores, gold);
    double prev_recall = 0.0, prev_ndcg = 0.0;
    for (std::size_t k = 1; k <= 12; ++k) {
        const double r = metrics::recall_at_k(run, k);
        const double n = metrics::ndcg_at_k(run, k);
        EXPECT_GE(r + 1e-15, prev_recall);
        EXPECT_GE(n + 1e-15, prev_ndcg);
        prev_recall = r;
        prev_ndcg = n;
    }
    EXPECT_GE(metrics::mrr(run), metrics::recall_at_k(run, 1));

    // Permuting the queries leaves every metric unchanged.
    DenseMatrix shuffled(8, 12);
    std::vector<std::size_t> gold_shuffled(8);
    const std::size_t perm[8] = {5, 2, 7, 0, 3, 6, 1, 4};
    for (std::size_t q = 0; q < 8; ++q) {
        gold_shuffled[q] = gold[perm[q]];
        for (std::size_t j = 0; j < 12; ++j) shuffled(q, j) = scores(perm[q], j);
    }
    const RankedRun run2 = metrics::make_ranked_run(shuffled, gold_shuffled);
    EXPECT_NEAR(metrics::mrr(run), metrics::mrr(run2), 1e-15);
    EXPECT_NEAR(metrics::ndcg_at_k(run, 5), metrics::ndcg_at_k(run2, 5), 1e-15);

    // A strictly increasing transform of the scores cannot change ranks.
    DenseMatrix warped = scores;
    for (double& v : warped.data) v = std::exp(v);
    const RankedRun run3 = metrics::make_ranked_run(warped, gold);
    EXPECT_EQ(metrics::mrr(run), metrics::mrr(run3));
}

TEST(Report, RejectsDegenerateInput) {
    EXPECT_THROW(metrics::mrr(RankedRun{}), NumericError);
    EXPECT_THROW(metrics::make_ranked_run(DenseMatrix(2, 3), {0}), DimensionError);
    EXPECT_THROW(metrics::make_ranked_run(DenseMatrix(1, 3), {3}), NumericError);
}

TEST(Report, BundlesRequestedCutoffs) {
    const RankedRun run = metrics::make_ranked_run(ranked_scores(), kGold);
    const metrics::MetricsReport rep = metrics::report_from_run(run, {1, 3});
    EXPECT_EQ(rep.n_queries, 3u);
    EXPECT_NEAR(rep.mrr, 0.5833333333333334, 1e-12);
    EXPECT_NEAR(rep.recall_at.at(1), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(rep.ndcg_at.at(3), 0.5436432511904858, 1e-12);
    // Single-gold relevance collapses ndcg@1 onto recall@1.
    EXPECT_DOUBLE_EQ(rep.ndcg_at.at(1), rep.recall_at.at(1));
}

// Exhaustive re-implementation of the evaluation pipeline, sharing no code
// with metrics::evaluate: encode with plain loops, rank by counting, and
// average the textbook formulas.
struct BruteForceReport {
    double mrr = 0.0, recall1 = 0.0, recall3 = 0.0, ndcg3 = 0.0;
};

BruteForceReport brute_force_eval(const bench::BiEncoder& enc, const bench::RetrievalDataset& ds) {
    const auto embed = [&](const DenseVector& x) {
        const DenseMatrix& w = enc.base_weight();
        DenseVector raw(w.rows, 0.0);
        DenseMatrix delta(w.rows, w.cols);
        if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&enc.model)) {
            delta = adapters::delta_matrix(*og);
        } else if (const auto* lora = std::get_if<adapters::LoraAdapter>(&enc.model)) {
            delta = adapters::delta_matrix(*lora);
        }
        for (std::size_t i = 0; i < w.rows; ++i) {
            for (std::size_t j = 0; j < w.cols; ++j) raw[i] += (w(i, j) + delta(i, j)) * x[j];
        }
        double nrm = 0.0;
        for (double v : raw) nrm += v * v;
        nrm = std::sqrt(nrm);
        for (double& v : raw) v /= nrm;
        return raw;
    };

    std::vector<DenseVector> cand;
    cand.reserve(ds.candidates.size());
    for (const auto& c : ds.candidates) cand.push_back(embed(c));

    BruteForceReport rep;
    for (const auto& ex : ds.examples) {
        const DenseVector q = embed(ex.description);
        std::vector<double> score(cand.size(), 0.0);
        for (std::size_t j = 0; j < cand.size(); ++j) {
            for (std::size_t i = 0; i < q.size(); ++i) score[j] += q[i] * cand[j][i];
        }
        // Rank of gold = 1 + #{better} + #{equal with smaller id}.
        std::size_t rank = 1;
        for (std::size_t j = 0; j < cand.size(); ++j) {
            if (j == ex.concept_id) continue;
            if (score[j] > score[ex.concept_id]) ++rank;
            if (score[j] == score[ex.concept_id] && j < ex.concept_id) ++rank;
        }
        rep.mrr += 1.0 / static_cast<double>(rank);
        rep.recall1 += rank <= 1 ? 1.0 : 0.0;
        rep.recall3 += rank <= 3 ? 1.0 : 0.0;
        rep.ndcg3 += rank <= 3 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    }
    const double n = static_cast<double>(ds.examples.size());
    rep.mrr /= n;
    rep.recall1 /= n;
    rep.recall3 /= n;
    rep.ndcg3 /= n;
    return rep;
}

TEST(Evaluate, MatchesBruteForceOracleOnMicroDataset) {
    RunConfig cfg;
    cfg.method = "orthogeo";
    cfg.sigma_mode = "direct";
    cfg.s_init = 0.4;  // non-zero update so the adapter path matters
    cfg.d_feat = 16;
    cfg.d_emb = 16;
    cfg.rank = 3;
    cfg.depth = 1;
    cfg.branching = 9;  // 10 concepts
    cfg.per_concept = 6;
    cfg.seed = 23;
    cfg.finalize();

    const bench::ConceptTree tree =
        bench::generate_taxonomy(cfg.depth, cfg.branching, cfg.d_feat, cfg.seed, cfg.gamma);
    const bench::RetrievalDataset ds =
        bench::generate_descriptions(tree, cfg.per_concept, cfg.noise, cfg.mix, cfg.seed);
    const bench::BiEncoder enc = bench::make_encoder(cfg);

    const metrics::MetricsReport rep = metrics::evaluate(enc, ds, {1, 3});
    const BruteForceReport oracle = brute_force_eval(enc, ds);

    EXPECT_NEAR(rep.mrr, oracle.mrr, 1e-12);
    EXPECT_NEAR(rep.recall_at.at(1), oracle.recall1, 1e-12);
    EXPECT_NEAR(rep.recall_at.at(3), oracle.recall3, 1e-12);
    EXPECT_NEAR(rep.ndcg_at.at(3), oracle.ndcg3, 1e-12);
}

TEST(Evaluate, PerfectOnNoiselessSeparableData) {
    RunConfig cfg;
    cfg.method = "none";
    cfg.d_feat = 16;
    cfg.d_emb = 16;
    cfg.depth = 2;
    cfg.branching = 3;
    cfg.per_concept = 4;
    cfg.noise = 0.0;
    cfg.mix = 0.0;  // descriptions collapse onto the prototypes exactly
    cfg.seed = 5;
    cfg.finalize();

    const bench::ConceptTree tree =
        bench::generate_taxonomy(cfg.depth, cfg.branching, cfg.d_feat, cfg.seed, cfg.gamma);
    const bench::RetrievalDataset ds =
        bench::generate_descriptions(tree, cfg.per_concept, cfg.noise, cfg.mix, cfg.seed);
    const metrics::MetricsReport rep = metrics::evaluate(bench::make_encoder(cfg), ds, {1, 3});
    EXPECT_NEAR(rep.mrr, 1.0, 1e-9);
    EXPECT_NEAR(rep.recall_at.at(1), 1.0, 1e-12);
}

}  // namespace
