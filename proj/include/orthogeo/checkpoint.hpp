#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "json.hpp"

#include "orthogeo/bench.hpp"
#include "orthogeo/config.hpp"
#include "orthogeo/errors.hpp"
#include "orthogeo/optim.hpp"

namespace orthogeo::io {

inline constexpr const char* kCheckpointFormat = "orthogeo.checkpoint.v1";

// Everything needed to restore a run's model: the config that produced it,
// the encoder (base weight plus adapter parameters), and optionally the
// optimizer moments for bit-identical continuation. Values are stored as
// plain JSON doubles; the serializer emits shortest round-trip decimals, so
// save -> load -> save reproduces identical bytes.
struct Checkpoint {
    RunConfig config;
    bench::BiEncoder encoder;
    std::optional<optim::AdamState> optimizer;
};

namespace detail {

inline nlohmann::json matrix_to_json(const DenseMatrix& m) { return m.data; }

inline DenseMatrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                                    const char* what) {
    if (!j.is_array() || j.size() != rows * cols) {
        throw IoError(std::string("checkpoint: field '") + what + "' has the wrong length");
    }
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = j[i].get<double>();
    require_finite(m, what);
    return m;
}

inline DenseVector vector_from_json(const nlohmann::json& j, std::size_t len, const char* what) {
    if (!j.is_array() || j.size() != len) {
        throw IoError(std::string("checkpoint: field '") + what + "' has the wrong length");
    }
    DenseVector v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = j[i].get<double>();
    require_finite(v, what);
    return v;
}

inline nlohmann::json adam_to_json(const optim::AdamState& st) {
    return nlohmann::json{
        {"lr", st.lr},   {"beta1", st.beta1}, {"beta2", st.beta2},
        {"eps", st.eps}, {"weight_decay", st.weight_decay},
        {"t", st.t},     {"m", st.m},         {"v", st.v},
    };
}

inline optim::AdamState adam_from_json(const nlohmann::json& j) {
    optim::AdamState st;
    st.lr = j.at("lr").get<double>();
    st.beta1 = j.at("beta1").get<double>();
    st.beta2 = j.at("beta2").get<double>();
    st.eps = j.at("eps").get<double>();
    st.weight_decay = j.at("weight_decay").get<double>();
    st.t = j.at("t").get<std::uint64_t>();
    st.m = j.at("m").get<std::vector<std::vector<double>>>();
    st.v = j.at("v").get<std::vector<std::vector<double>>>();
    return st;
}

}  // namespace detail

inline std::string checkpoint_to_json_text(const Checkpoint& ckpt) {
    nlohmann::json model;
    if (const auto* og = std::get_if<adapters::OrthoGeoAdapter>(&ckpt.encoder.model)) {
        model["kind"] = "orthogeo";
        model["d_in"] = og->d_in();
        model["d_out"] = og->d_out();
        model["rank"] = og->rank;
        model["alpha"] = og->alpha;
        model["sigma_mode"] = reparam::to_string(og->params.sigma_mode);
        model["epsilon"] = og->params.epsilon;
        model["w0"] = detail::matrix_to_json(og->w0);
        model["theta_a"] = detail::matrix_to_json(og->params.theta_a);
        model["theta_b"] = detail::matrix_to_json(og->params.theta_b);
        model["s"] = og->params.s;
    } else if (const auto* lora = std::get_if<adapters::LoraAdapter>(&ckpt.encoder.model)) {
        model["kind"] = "lora";
        model["d_in"] = lora->d_in();
        model["d_out"] = lora->d_out();
        model["rank"] = lora->rank;
        model["alpha"] = lora->alpha;
        model["w0"] = detail::matrix_to_json(lora->w0);
        model["a"] = detail::matrix_to_json(lora->a);
        model["b"] = detail::matrix_to_json(lora->b);
    } else {
        const auto& w0 = std::get<DenseMatrix>(ckpt.encoder.model);
        model["kind"] = "none";
        model["d_in"] = w0.cols;
        model["d_out"] = w0.rows;
        model["w0"] = detail::matrix_to_json(w0);
    }

    nlohmann::json j{
        {"format", kCheckpointFormat},
        {"config", config_io::to_json(ckpt.config)},
        {"model", std::move(model)},
        {"optimizer", ckpt.optimizer ? detail::adam_to_json(*ckpt.optimizer) : nlohmann::json(nullptr)},
    };
    return j.dump(2) + "\n";
}

inline Checkpoint checkpoint_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw IoError("checkpoint: unrecognized format tag");
        }
        Checkpoint ckpt;
        ckpt.config = config_io::from_json(j.at("config"));
        ckpt.config.finalize();

        const nlohmann::json& model = j.at("model");
        const std::string kind = model.at("kind").get<std::string>();
        const std::size_t d_in = model.at("d_in").get<std::size_t>();
        const std::size_t d_out = model.at("d_out").get<std::size_t>();
        DenseMatrix w0 = detail::matrix_from_json(model.at("w0"), d_out, d_in, "w0");

        ckpt.encoder.tau = ckpt.config.tau;
        if (kind == "orthogeo") {
            const std::size_t rank = model.at("rank").get<std::size_t>();
            const double alpha = model.at("alpha").get<double>();
            const std::string mode_str = model.at("sigma_mode").get<std::string>();
            if (mode_str != "softplus" && mode_str != "direct") {
                throw IoError("checkpoint: unknown sigma_mode '" + mode_str + "'");
            }
            const auto mode = mode_str == "direct" ? reparam::SigmaMode::Direct : reparam::SigmaMode::Softplus;
            reparam::EuclideanParams params(
                detail::matrix_from_json(model.at("theta_a"), d_in, rank, "theta_a"),
                detail::matrix_from_json(model.at("theta_b"), d_out, rank, "theta_b"),
                detail::vector_from_json(model.at("s"), rank, "s"), mode,
                model.at("epsilon").get<double>());
            ckpt.encoder.model = adapters::OrthoGeoAdapter(std::move(w0), std::move(params), alpha);
        } else if (kind == "lora") {
            const std::size_t rank = model.at("rank").get<std::size_t>();
            const double alpha = model.at("alpha").get<double>();
            ckpt.encoder.model = adapters::LoraAdapter(
                std::move(w0), detail::matrix_from_json(model.at("a"), d_in, rank, "a"),
                detail::matrix_from_json(model.at("b"), d_out, rank, "b"), alpha);
        } else if (kind == "none") {
            ckpt.encoder.model = std::move(w0);
        } else {
            throw IoError("checkpoint: unknown model kind '" + kind + "'");
        }

        if (!j.at("optimizer").is_null()) ckpt.optimizer = detail::adam_from_json(j.at("optimizer"));
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: missing or malformed field: ") + e.what());
    }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    config_io::write_file(path, checkpoint_to_json_text(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json_text(config_io::read_file(path));
}

}  // namespace orthogeo::io
