#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "orthogeo/adapters.hpp"
#include "orthogeo/errors.hpp"
#include "orthogeo/matrix.hpp"
#include "orthogeo/rng.hpp"

namespace orthogeo::bench {

// Substream ids so dataset content, encoder init, adapter init, and batch
// order draw from unrelated sequences of the same user seed.
namespace streams {
inline constexpr std::uint64_t kTaxonomy = 1;
inline constexpr std::uint64_t kDescriptions = 2;
inline constexpr std::uint64_t kEncoder = 3;
inline constexpr std::uint64_t kAdapter = 4;
inline constexpr std::uint64_t kShuffle = 5;
}  // namespace streams

// ---------------------------------------------------------------------------
// Synthetic concept hierarchy
// ---------------------------------------------------------------------------

// Rooted tree of concepts; ids are breadth-first, the root is id 0. Each
// concept carries a unit prototype vector, and children are noisy copies of
// their parent so siblings stay correlated.
struct ConceptTree {
    struct Node {
        std::size_t id = 0;
        long parent = -1;  // -1 for the root
        std::size_t depth = 0;
    };
    std::vector<Node> nodes;
    std::vector<DenseVector> prototypes;
    std::size_t d_feat = 0;

    std::size_t n_concepts() const { return nodes.size(); }
};

inline void normalize_in_place(DenseVector& v, const char* what) {
    const double nrm = norm2(v);
    if (nrm <= 1e-12) throw NumericError(std::string(what) + ": zero-norm vector");
    for (double& x : v) x /= nrm;
}

inline ConceptTree generate_taxonomy(std::size_t depth, std::size_t branching, std::size_t d_feat,
                                     std::uint64_t seed, double gamma = 0.5) {
    if (depth < 1) throw ConfigError("generate_taxonomy: depth must be >= 1");
    if (branching < 2) throw ConfigError("generate_taxonomy: branching must be >= 2");
    if (d_feat == 0) throw ConfigError("generate_taxonomy: d_feat must be positive");

    Rng rng = Rng::stream(seed, streams::kTaxonomy);
    ConceptTree tree;
    tree.d_feat = d_feat;

    // Random draws are scaled to unit expected norm so gamma reads as
    // "perturbation size relative to the (unit) parent prototype". With raw
    // per-coordinate draws the perturbation norm would grow like sqrt(d) and
    // siblings would decorrelate at any realistic gamma.
    const double unit_scale = 1.0 / std::sqrt(static_cast<double>(d_feat));

    DenseVector root(d_feat);
    for (double& x : root) x = rng.normal();
    normalize_in_place(root, "generate_taxonomy");
    tree.nodes.push_back({0, -1, 0});
    tree.prototypes.push_back(std::move(root));

    std::size_t level_begin = 0;
    std::size_t level_end = 1;
    for (std::size_t level = 1; level <= depth; ++level) {
        for (std::size_t p = level_begin; p < level_end; ++p) {
            for (std::size_t c = 0; c < branching; ++c) {
                DenseVector proto = tree.prototypes[p];
                for (double& x : proto) x += gamma * unit_scale * rng.normal();
                normalize_in_place(proto, "generate_taxonomy");
                tree.nodes.push_back({tree.nodes.size(), static_cast<long>(p), level});
                tree.prototypes.push_back(std::move(proto));
            }
        }
        level_begin = level_end;
        level_end = tree.nodes.size();
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Retrieval dataset
// ---------------------------------------------------------------------------

enum class Split { Train, Val, Test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

// Descriptions are noisy mixtures of a concept's prototype and its parent's;
// the candidate set is every concept prototype. A dataset is self-contained:
// evaluation needs nothing beyond it and an encoder.
struct RetrievalDataset {
    struct Example {
        DenseVector description;
        std::size_t concept_id = 0;
        Split split = Split::Train;
    };
    std::size_t d_feat = 0;
    std::vector<DenseVector> candidates;  // indexed by concept id
    std::vector<Example> examples;
};

inline RetrievalDataset subset(const RetrievalDataset& ds, Split split) {
    RetrievalDataset out;
    out.d_feat = ds.d_feat;
    out.candidates = ds.candidates;
    for (const auto& ex : ds.examples) {
        if (ex.split == split) out.examples.push_back(ex);
    }
    return out;
}

inline std::size_t count(const RetrievalDataset& ds, Split split) {
    std::size_t n = 0;
    for (const auto& ex : ds.examples) n += ex.split == split ? 1 : 0;
    return n;
}

// Per-concept split sizes: ceil(0.8 n) train, floor(0.1 n) val, rest test.
// With the default 24 descriptions per concept this is 20 / 2 / 2.
inline void split_sizes(std::size_t n, std::size_t& n_train, std::size_t& n_val, std::size_t& n_test) {
    n_train = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n)));
    n_val = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(n)));
    if (n_train + n_val > n) n_val = n - n_train;
    n_test = n - n_train - n_val;
}

inline RetrievalDataset generate_descriptions(const ConceptTree& tree, std::size_t per_concept,
                                              double noise, double mix, std::uint64_t seed) {
    if (per_concept == 0) throw ConfigError("generate_descriptions: per_concept must be positive");
    if (mix < 0.0 || mix > 1.0) throw ConfigError("generate_descriptions: mix must be in [0, 1]");
    if (noise < 0.0) throw ConfigError("generate_descriptions: noise must be non-negative");

    Rng rng = Rng::stream(seed, streams::kDescriptions);
    RetrievalDataset ds;
    ds.d_feat = tree.d_feat;
    ds.candidates = tree.prototypes;
    ds.examples.reserve(tree.n_concepts() * per_concept);

    // Per-coordinate std noise/sqrt(d) gives the noise vector norm ~ noise,
    // commensurate with the unit-norm signal: noise=1 means signal and
    // corruption carry equal energy.
    const double noise_scale = noise / std::sqrt(static_cast<double>(tree.d_feat));

    std::size_t n_train = 0, n_val = 0, n_test = 0;
    split_sizes(per_concept, n_train, n_val, n_test);

    for (std::size_t cid = 0; cid < tree.n_concepts(); ++cid) {
        const DenseVector& proto = tree.prototypes[cid];
        // The root blends with itself, so its mix term is a no-op.
        const DenseVector& parent =
            tree.nodes[cid].parent < 0 ? proto : tree.prototypes[static_cast<std::size_t>(tree.nodes[cid].parent)];
        for (std::size_t k = 0; k < per_concept; ++k) {
            DenseVector desc(tree.d_feat);
            for (std::size_t i = 0; i < tree.d_feat; ++i) {
                desc[i] = (1.0 - mix) * proto[i] + mix * parent[i] + noise_scale * rng.normal();
            }
            normalize_in_place(desc, "generate_descriptions");
            const Split split = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
            ds.examples.push_back({std::move(desc), cid, split});
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Bi-encoder
// ---------------------------------------------------------------------------

// Shared-weight linear encoder with L2-normalized outputs. Queries and
// candidates go through the same map, which is either a bare base weight or
// a base weight plus a trained adapter.
struct BiEncoder {
    std::variant<DenseMatrix, adapters::OrthoGeoAdapter, adapters::LoraAdapter> model;
    double tau = 0.05;

    std::size_t d_feat() const {
        if (const auto* m = std::get_if<DenseMatrix>(&model)) return m->cols;
        if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&model)) return og->d_in();
        return std::get<adapters::LoraAdapter>(model).d_in();
    }
    std::size_t d_emb() const {
        if (const auto* m = std::get_if<DenseMatrix>(&model)) return m->rows;
        if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&model)) return og->d_out();
        return std::get<adapters::LoraAdapter>(model).d_out();
    }
    const DenseMatrix& base_weight() const {
        if (const auto* m = std::get_if<DenseMatrix>(&model)) return *m;
        if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&model)) return og->w0;
        return std::get<adapters::LoraAdapter>(model).w0;
    }
};

inline DenseMatrix make_base_weight(std::size_t d_emb, std::size_t d_feat, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, streams::kEncoder);
    DenseMatrix w0(d_emb, d_feat);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_feat));
    for (double& v : w0.data) v = rng.normal(0.0, scale);
    return w0;
}

// Forward pass over a batch of column vectors, keeping what the backward
// pass needs: raw outputs, their norms, and the adapter cache.
struct ForwardBatch {
    DenseMatrix raw;   // d_emb x n, pre-normalization
    DenseMatrix unit;  // d_emb x n, L2-normalized columns
    DenseVector norms;
    std::variant<std::monostate, adapters::OrthoCache, adapters::LoraCache> cache;
};

inline ForwardBatch encode_batch(const BiEncoder& enc, const DenseMatrix& x) {
    ForwardBatch fb;
    if (const auto* m = std::get_if<DenseMatrix>(&enc.model)) {
        fb.raw = matmul(*m, x);
    } else if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&enc.model)) {
        auto [y, cache] = adapters::ortho_forward(*og, x);
        fb.raw = std::move(y);
        fb.cache = std::move(cache);
    } else {
        auto [y, cache] = adapters::lora_forward(std::get<adapters::LoraAdapter>(enc.model), x);
        fb.raw = std::move(y);
        fb.cache = std::move(cache);
    }
    fb.unit = fb.raw;
    fb.norms.resize(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < fb.raw.rows; ++i) acc += fb.raw(i, j) * fb.raw(i, j);
        const double nrm = std::sqrt(acc);
        if (nrm <= 1e-12) throw NumericError("encode: degenerate (zero-norm) encoder output");
        fb.norms[j] = nrm;
        for (std::size_t i = 0; i < fb.raw.rows; ++i) fb.unit(i, j) /= nrm;
    }
    return fb;
}

inline DenseVector encode(const BiEncoder& enc, const DenseVector& x) {
    if (x.size() != enc.d_feat()) throw DimensionError("encode: input length != d_feat");
    return column_of(encode_batch(enc, column_matrix(x)).unit, 0);
}

// Pullback of dL/d(unit) to dL/d(raw) through column-wise L2 normalization:
// g_raw = (g_unit - <g_unit, e> e) / ||raw||.
inline DenseMatrix normalize_backward(const ForwardBatch& fb, const DenseMatrix& grad_unit) {
    if (grad_unit.rows != fb.unit.rows || grad_unit.cols != fb.unit.cols) {
        throw ContractError("normalize_backward: cotangent shape mismatch");
    }
    DenseMatrix g(fb.raw.rows, fb.raw.cols);
    for (std::size_t j = 0; j < fb.raw.cols; ++j) {
        double inner = 0.0;
        for (std::size_t i = 0; i < fb.raw.rows; ++i) inner += grad_unit(i, j) * fb.unit(i, j);
        for (std::size_t i = 0; i < fb.raw.rows; ++i) {
            g(i, j) = (grad_unit(i, j) - inner * fb.unit(i, j)) / fb.norms[j];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// InfoNCE
// ---------------------------------------------------------------------------

struct InfoNceResult {
    double loss = 0.0;
    DenseMatrix grad_queries;
    DenseMatrix grad_candidates;
};

// In-batch contrastive loss. Columns of `queries` and `candidates` are
// embeddings; gold[i] is the candidate column holding query i's positive.
// Returns the mean negative log-likelihood and gradients for both sides.
inline InfoNceResult infonce_loss(const DenseMatrix& queries, const DenseMatrix& candidates,
                                  const std::vector<std::size_t>& gold, double tau) {
    if (queries.rows != candidates.rows) throw DimensionError("infonce_loss: embedding dims disagree");
    if (gold.size() != queries.cols) throw DimensionError("infonce_loss: one gold index per query required");
    if (queries.cols == 0 || candidates.cols == 0) throw DimensionError("infonce_loss: empty batch");
    if (!(tau > 0.0)) throw ConfigError("infonce_loss: tau must be positive");
    for (std::size_t g : gold) {
        if (g >= candidates.cols) throw NumericError("infonce_loss: gold index missing from candidate set");
    }

    const std::size_t nb = queries.cols;
    const std::size_t nc = candidates.cols;
    const std::size_t d = queries.rows;

    DenseMatrix scores(nb, nc);
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += queries(k, i) * candidates(k, j);
            scores(i, j) = acc / tau;
        }
    }

    InfoNceResult out;
    out.grad_queries = DenseMatrix(d, nb);
    out.grad_candidates = DenseMatrix(d, nc);
    DenseMatrix dscores(nb, nc);

    double total = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
        double row_max = scores(i, 0);
        for (std::size_t j = 1; j < nc; ++j) row_max = std::max(row_max, scores(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < nc; ++j) denom += std::exp(scores(i, j) - row_max);
        const double log_denom = std::log(denom) + row_max;
        total += log_denom - scores(i, gold[i]);
        for (std::size_t j = 0; j < nc; ++j) {
            const double p = std::exp(scores(i, j) - log_denom);
            dscores(i, j) = (p - (j == gold[i] ? 1.0 : 0.0)) / static_cast<double>(nb);
        }
    }
    out.loss = total / static_cast<double>(nb);

    // Chain through scores = q^T c / tau.
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
            const double w = dscores(i, j) / tau;
            if (w == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) {
                out.grad_queries(k, i) += w * candidates(k, j);
                out.grad_candidates(k, j) += w * queries(k, i);
            }
        }
    }
    return out;
}

}  // namespace orthogeo::bench
