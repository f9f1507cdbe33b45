#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "orthogeo/adapters.hpp"
#include "orthogeo/errors.hpp"
#include "orthogeo/train.hpp"

namespace orthogeo::analysis {

// Entropy effective rank: exp of the Shannon entropy of the normalized
// spectrum. Equals r for a flat spectrum, 1 for a single surviving
// direction, and is invariant to overall scale.
inline double effective_rank(const DenseVector& spectrum) {
    if (spectrum.empty()) throw NumericError("effective_rank: empty spectrum");
    double total = 0.0;
    for (double v : spectrum) {
        if (!std::isfinite(v)) throw NumericError("effective_rank: non-finite singular value");
        if (v < 0.0) throw NumericError("effective_rank: negative singular value");
        total += v;
    }
    if (total <= 0.0) throw NumericError("effective_rank: all-zero spectrum");
    double entropy = 0.0;
    for (double v : spectrum) {
        if (v == 0.0) continue;
        const double p = v / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

// Stable rank sum(s^2)/max(s)^2, reported alongside the entropy variant as a
// cheap cross-check.
inline double stable_rank(const DenseVector& spectrum) {
    if (spectrum.empty()) throw NumericError("stable_rank: empty spectrum");
    double smax = 0.0, sq = 0.0;
    for (double v : spectrum) {
        if (!std::isfinite(v)) throw NumericError("stable_rank: non-finite singular value");
        if (v < 0.0) throw NumericError("stable_rank: negative singular value");
        smax = std::max(smax, v);
        sq += v * v;
    }
    if (smax == 0.0) throw NumericError("stable_rank: all-zero spectrum");
    return sq / (smax * smax);
}

struct SpectrumRecord {
    std::string method;
    std::size_t rank = 0;
    DenseVector sigma;  // descending
    double effective_rank = 0.0;
    double stable_rank = 0.0;
};

inline SpectrumRecord make_spectrum_record(const std::string& method, std::size_t rank, DenseVector sigma) {
    SpectrumRecord rec;
    rec.method = method;
    rec.rank = rank;
    rec.sigma = std::move(sigma);
    rec.effective_rank = effective_rank(rec.sigma);
    rec.stable_rank = stable_rank(rec.sigma);
    return rec;
}

// Spectrum of whatever update the encoder carries. Adapters whose update is
// identically zero, or not finite (possible after an aborted run restores a
// blown-up snapshot), have no usable spectrum and are skipped with a warning.
inline bool spectrum_record_for(const bench::BiEncoder& enc, const std::string& method,
                                SpectrumRecord& out, std::ostream* warn) {
    DenseVector sigma;
    std::size_t rank = 0;
    if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&enc.model)) {
        sigma = adapters::delta_spectrum(*og);
        rank = og->rank;
    } else if (const auto* lora = std::get_if<adapters::LoraAdapter>(&enc.model)) {
        sigma = adapters::delta_spectrum(*lora);
        rank = lora->rank;
    } else {
        if (warn != nullptr) *warn << "spectrum: '" << method << "' has no adapter; skipped\n";
        return false;
    }
    double total = 0.0;
    for (double v : sigma) {
        if (!std::isfinite(v)) {
            if (warn != nullptr) *warn << "spectrum: '" << method << "' update is not finite; skipped\n";
            return false;
        }
        total += v;
    }
    if (total == 0.0) {
        if (warn != nullptr) *warn << "spectrum: '" << method << "' update is identically zero; skipped\n";
        return false;
    }
    out = make_spectrum_record(method, rank, std::move(sigma));
    return true;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Long-format CSV: one row per singular value.
inline std::string spectrum_csv(const std::vector<SpectrumRecord>& records) {
    std::string out = "method,r,idx,sigma\n";
    for (const auto& rec : records) {
        for (std::size_t i = 0; i < rec.sigma.size(); ++i) {
            out += rec.method + "," + std::to_string(rec.rank) + "," + std::to_string(i) + "," +
                   format_double(rec.sigma[i]) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rank ablation
// ---------------------------------------------------------------------------

struct AblationCell {
    std::string method;
    std::size_t rank = 0;
    std::uint64_t seed = 0;
    double mrr = std::nan("");
    bool failed = false;
    std::string error;
};

struct AblationRecord {
    std::string method;
    std::size_t rank = 0;
    double mean_mrr = std::nan("");
    std::vector<double> per_seed;  // one entry per seed, NaN where the cell failed
};

struct AblationResult {
    std::vector<AblationCell> cells;       // ordered by (method, rank, seed)
    std::vector<AblationRecord> records;   // ordered by (method, rank)
};

// Trains every (method, rank, seed) cell on the shared base config and
// aggregates mean test MRR. Cells are independent, so they run on a small
// worker pool; results land in preallocated slots, keeping aggregation
// deterministic. A failing cell is recorded and does not stop the sweep.
inline AblationResult rank_ablation(const RunConfig& base, const std::vector<std::size_t>& ranks,
                                    const std::vector<std::uint64_t>& seeds, std::size_t jobs = 0) {
    if (ranks.empty() || seeds.empty()) throw ConfigError("rank_ablation: empty rank or seed grid");

    const std::vector<std::string> methods{"lora", "orthogeo"};
    AblationResult result;
    for (const auto& method : methods) {
        for (std::size_t r : ranks) {
            for (std::uint64_t s : seeds) {
                AblationCell cell;
                cell.method = method;
                cell.rank = r;
                cell.seed = s;
                result.cells.push_back(std::move(cell));
            }
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= result.cells.size()) return;
            AblationCell& cell = result.cells[i];
            try {
                RunConfig cfg = base;
                cfg.method = cell.method;
                cfg.rank = cell.rank;
                cfg.seed = cell.seed;
                cell.mrr = bench::train(cfg).test_metrics.mrr;
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
    };

    std::size_t n_workers = jobs != 0 ? jobs : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    n_workers = std::min(n_workers, result.cells.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::size_t idx = 0;
    for (const auto& method : methods) {
        for (std::size_t r : ranks) {
            AblationRecord rec;
            rec.method = method;
            rec.rank = r;
            double sum = 0.0;
            std::size_t ok = 0;
            for (std::size_t s = 0; s < seeds.size(); ++s, ++idx) {
                const AblationCell& cell = result.cells[idx];
                rec.per_seed.push_back(cell.failed ? std::nan("") : cell.mrr);
                if (!cell.failed) {
                    sum += cell.mrr;
                    ok += 1;
                }
            }
            if (ok > 0) rec.mean_mrr = sum / static_cast<double>(ok);
            result.records.push_back(std::move(rec));
        }
    }
    return result;
}

inline std::string ablation_csv(const AblationResult& result) {
    std::string out = "method,r,seed,mrr\n";
    for (const auto& cell : result.cells) {
        out += cell.method + "," + std::to_string(cell.rank) + "," + std::to_string(cell.seed) + "," +
               (cell.failed ? std::string("nan") : format_double(cell.mrr)) + "\n";
    }
    return out;
}

}  // namespace orthogeo::analysis
