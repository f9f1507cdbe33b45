#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "orthogeo/bench.hpp"
#include "orthogeo/errors.hpp"
#include "orthogeo/matrix.hpp"

namespace orthogeo::metrics {

// Per-query candidate orderings (best first) plus the gold candidate id.
// Rankings must be permutations of a common candidate set 0..n_candidates-1.
struct RankedRun {
    struct Query {
        std::vector<std::size_t> ranking;
        std::size_t gold = 0;
    };
    std::size_t n_candidates = 0;
    std::vector<Query> queries;
};

// Orders candidates by score descending; ties break toward the smaller
// candidate id so reruns are byte-stable.
inline RankedRun make_ranked_run(const DenseMatrix& scores, const std::vector<std::size_t>& gold) {
    if (scores.rows != gold.size()) throw DimensionError("make_ranked_run: one gold per score row required");
    RankedRun run;
    run.n_candidates = scores.cols;
    run.queries.resize(scores.rows);
    for (std::size_t q = 0; q < scores.rows; ++q) {
        if (gold[q] >= scores.cols) throw NumericError("make_ranked_run: gold id outside candidate set");
        auto& ranking = run.queries[q].ranking;
        ranking.resize(scores.cols);
        std::iota(ranking.begin(), ranking.end(), 0);
        std::sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
            if (scores(q, a) != scores(q, b)) return scores(q, a) > scores(q, b);
            return a < b;
        });
        run.queries[q].gold = gold[q];
    }
    return run;
}

inline void validate(const RankedRun& run) {
    if (run.queries.empty()) throw NumericError("RankedRun: no queries");
    std::vector<char> seen;
    for (const auto& q : run.queries) {
        if (q.ranking.size() != run.n_candidates) throw ContractError("RankedRun: ranking length mismatch");
        if (q.gold >= run.n_candidates) throw ContractError("RankedRun: gold id outside candidate set");
        seen.assign(run.n_candidates, 0);
        for (std::size_t id : q.ranking) {
            if (id >= run.n_candidates || seen[id]) throw ContractError("RankedRun: ranking is not a permutation");
            seen[id] = 1;
        }
    }
}

namespace detail {

// 1-based position of the gold id within a ranking.
inline std::size_t gold_rank(const RankedRun::Query& q) {
    for (std::size_t pos = 0; pos < q.ranking.size(); ++pos) {
        if (q.ranking[pos] == q.gold) return pos + 1;
    }
    throw ContractError("RankedRun: gold id missing from ranking");
}

}  // namespace detail

inline double mrr(const RankedRun& run) {
    if (run.queries.empty()) throw NumericError("mrr: empty run");
    double acc = 0.0;
    for (const auto& q : run.queries) acc += 1.0 / static_cast<double>(detail::gold_rank(q));
    return acc / static_cast<double>(run.queries.size());
}

inline double recall_at_k(const RankedRun& run, std::size_t k) {
    if (run.queries.empty()) throw NumericError("recall_at_k: empty run");
    if (k == 0) throw ConfigError("recall_at_k: k must be positive");
    double acc = 0.0;
    for (const auto& q : run.queries) acc += detail::gold_rank(q) <= k ? 1.0 : 0.0;
    return acc / static_cast<double>(run.queries.size());
}

// Binary relevance with a single gold: DCG is 1/log2(1+rank) when the gold
// lands in the top k, and the ideal DCG is 1.
inline double ndcg_at_k(const RankedRun& run, std::size_t k) {
    if (run.queries.empty()) throw NumericError("ndcg_at_k: empty run");
    if (k == 0) throw ConfigError("ndcg_at_k: k must be positive");
    double acc = 0.0;
    for (const auto& q : run.queries) {
        const std::size_t rank = detail::gold_rank(q);
        if (rank <= k) acc += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }
    return acc / static_cast<double>(run.queries.size());
}

struct MetricsReport {
    double mrr = 0.0;
    std::map<std::size_t, double> recall_at;
    std::map<std::size_t, double> ndcg_at;
    std::size_t n_queries = 0;
};

inline MetricsReport report_from_run(const RankedRun& run, const std::vector<std::size_t>& ks) {
    MetricsReport rep;
    rep.mrr = mrr(run);
    rep.n_queries = run.queries.size();
    for (std::size_t k : ks) {
        rep.recall_at[k] = recall_at_k(run, k);
        rep.ndcg_at[k] = ndcg_at_k(run, k);
    }
    return rep;
}

// Scores every example in the dataset against every candidate concept and
// reduces to a report. Candidate labels go through the same encoder as the
// queries.
inline MetricsReport evaluate(const bench::BiEncoder& enc, const bench::RetrievalDataset& ds,
                              const std::vector<std::size_t>& ks) {
    if (ds.examples.empty()) throw NumericError("evaluate: dataset has no examples");
    if (ds.candidates.empty()) throw NumericError("evaluate: dataset has no candidates");

    DenseMatrix cand_x(ds.d_feat, ds.candidates.size());
    for (std::size_t j = 0; j < ds.candidates.size(); ++j) {
        for (std::size_t i = 0; i < ds.d_feat; ++i) cand_x(i, j) = ds.candidates[j][i];
    }
    const DenseMatrix cand_emb = bench::encode_batch(enc, cand_x).unit;

    DenseMatrix query_x(ds.d_feat, ds.examples.size());
    std::vector<std::size_t> gold(ds.examples.size());
    for (std::size_t q = 0; q < ds.examples.size(); ++q) {
        for (std::size_t i = 0; i < ds.d_feat; ++i) query_x(i, q) = ds.examples[q].description[i];
        gold[q] = ds.examples[q].concept_id;
    }
    const DenseMatrix query_emb = bench::encode_batch(enc, query_x).unit;

    DenseMatrix scores = matmul(transpose(query_emb), cand_emb);
    return report_from_run(make_ranked_run(scores, gold), ks);
}

}  // namespace orthogeo::metrics
