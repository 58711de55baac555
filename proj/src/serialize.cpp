#include "petnn/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace petnn {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("petnn: unknown activation '" + name + "'");
}

std::string variant_name(UpdateVariant v) {
    switch (v) {
        case UpdateVariant::self_selective: return "self_selective";
        case UpdateVariant::traditional_gating: return "traditional_gating";
        case UpdateVariant::quasi_linear: return "quasi_linear";
        case UpdateVariant::exp_gating: return "exp_gating";
    }
    return "?";
}

UpdateVariant variant_from_name(const std::string& name) {
    if (name == "self_selective") return UpdateVariant::self_selective;
    if (name == "traditional_gating") return UpdateVariant::traditional_gating;
    if (name == "quasi_linear") return UpdateVariant::quasi_linear;
    if (name == "exp_gating") return UpdateVariant::exp_gating;
    throw std::invalid_argument("petnn: unknown update variant '" + name + "'");
}

std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::mse: return "mse";
        case LossKind::mae: return "mae";
        case LossKind::cross_entropy: return "cross_entropy";
    }
    return "?";
}

LossKind loss_from_name(const std::string& name) {
    if (name == "mse") return LossKind::mse;
    if (name == "mae") return LossKind::mae;
    if (name == "cross_entropy") return LossKind::cross_entropy;
    throw std::invalid_argument("petnn: unknown loss '" + name + "'");
}

nlohmann::json cell_config_to_json(const CellConfig& cfg) {
    return {
        {"input_dim", cfg.input_dim},
        {"hidden_dim", cfg.hidden_dim},
        {"time_activation", activation_name(cfg.time_activation)},
        {"candidate_activation", activation_name(cfg.candidate_activation)},
        {"output_activation", activation_name(cfg.output_activation)},
        {"mix_gate_squash", cfg.mix_gate_squash == MixGateSquash::sigmoid ? "sigmoid" : "none"},
        {"boundary_rule", cfg.boundary_rule == BoundaryRule::release_on_leq_zero
                              ? "release_on_leq_zero"
                              : "release_on_lt_zero"},
        {"update_variant", variant_name(cfg.update_variant)},
    };
}

CellConfig cell_config_from_json(const nlohmann::json& j) {
    CellConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.time_activation = activation_from_name(j.at("time_activation").get<std::string>());
    cfg.candidate_activation = activation_from_name(j.at("candidate_activation").get<std::string>());
    cfg.output_activation = activation_from_name(j.at("output_activation").get<std::string>());
    const std::string squash = j.at("mix_gate_squash").get<std::string>();
    if (squash == "sigmoid")
        cfg.mix_gate_squash = MixGateSquash::sigmoid;
    else if (squash == "none")
        cfg.mix_gate_squash = MixGateSquash::none;
    else
        throw std::invalid_argument("petnn: unknown mix_gate_squash '" + squash + "'");
    const std::string rule = j.at("boundary_rule").get<std::string>();
    if (rule == "release_on_leq_zero")
        cfg.boundary_rule = BoundaryRule::release_on_leq_zero;
    else if (rule == "release_on_lt_zero")
        cfg.boundary_rule = BoundaryRule::release_on_lt_zero;
    else
        throw std::invalid_argument("petnn: unknown boundary_rule '" + rule + "'");
    cfg.update_variant = variant_from_name(j.at("update_variant").get<std::string>());
    cfg.validate();
    return cfg;
}

nlohmann::json cell_params_to_json(const CellConfig& cfg, const CellParams& params) {
    return {
        {"format_version", kFormatVersion},
        {"cell_config", cell_config_to_json(cfg)},
        {"params", detail::blocks_to_json(params)},
    };
}

CellParams cell_params_from_json(const nlohmann::json& j, CellConfig& cfg_out) {
    if (j.at("format_version").get<int>() != kFormatVersion)
        throw std::invalid_argument("petnn: unsupported format_version");
    cfg_out = cell_config_from_json(j.at("cell_config"));
    CellParams params(cfg_out);
    detail::blocks_from_json(j.at("params"), params);
    return params;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {
        {"seed", cfg.seed},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"learning_rate", cfg.learning_rate},
        {"adam_beta1", cfg.adam_beta1},
        {"adam_beta2", cfg.adam_beta2},
        {"adam_eps", cfg.adam_eps},
        {"grad_clip_norm", cfg.grad_clip_norm},
        {"loss", loss_name(cfg.loss)},
        {"reset_policy",
         {{"time_retained", cfg.reset_policy.time_retained},
          {"energy_retained", cfg.reset_policy.energy_retained}}},
        {"bptt_window", cfg.bptt_window},
        {"patience", cfg.patience},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.adam_beta1 = j.at("adam_beta1").get<double>();
    cfg.adam_beta2 = j.at("adam_beta2").get<double>();
    cfg.adam_eps = j.at("adam_eps").get<double>();
    cfg.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    cfg.loss = loss_from_name(j.at("loss").get<std::string>());
    cfg.reset_policy.time_retained = j.at("reset_policy").at("time_retained").get<bool>();
    cfg.reset_policy.energy_retained = j.at("reset_policy").at("energy_retained").get<bool>();
    cfg.bptt_window = j.at("bptt_window").get<std::size_t>();
    cfg.patience = j.at("patience").get<std::size_t>();
    cfg.validate();
    return cfg;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("petnn: cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("petnn: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("petnn: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// compact SHA-1, enough for content addressing of small config/data blobs
std::string sha1_hex(const void* data, std::size_t len) {
    const auto* msg = static_cast<const unsigned char*>(data);
    std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
    const std::uint64_t total_bits = static_cast<std::uint64_t>(len) * 8;
    std::vector<unsigned char> buf(msg, msg + len);
    buf.push_back(0x80);
    while (buf.size() % 64 != 56) buf.push_back(0);
    for (int i = 7; i >= 0; --i) buf.push_back(static_cast<unsigned char>(total_bits >> (8 * i)));

    auto rol = [](std::uint32_t v, int n) { return (v << n) | (v >> (32 - n)); };
    for (std::size_t chunk = 0; chunk < buf.size(); chunk += 64) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(buf[chunk + 4 * i]) << 24) |
                   (std::uint32_t(buf[chunk + 4 * i + 1]) << 16) |
                   (std::uint32_t(buf[chunk + 4 * i + 2]) << 8) |
                   std::uint32_t(buf[chunk + 4 * i + 3]);
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = tmp;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(40);
    for (std::uint32_t v : h)
        for (int i = 7; i >= 0; --i) out.push_back(hex[(v >> (4 * i)) & 0xF]);
    return out;
}

std::string git_blob_sha1(const std::string& content) {
    std::string blob = "blob " + std::to_string(content.size());
    blob.push_back('\0');
    blob += content;
    return sha1_hex(blob.data(), blob.size());
}

namespace {

template <class Cell>
nlohmann::json snapshot_to_json_impl(const TrainerSnapshot<Cell>& snap, const char* kind,
                                     nlohmann::json cell_section) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["model_kind"] = kind;
    j["cell_config"] = std::move(cell_section);
    j["params"] = detail::blocks_to_json(snap.model.cell.params);
    j["head"] = {
        {"out_dim", snap.model.head.out_dim()},
        {"params", detail::blocks_to_json(snap.model.head)},
    };
    j["optimizer"] = {
        {"step", snap.adam_step},
        {"m",
         {{"cell", detail::blocks_to_json(snap.adam_m.cell)},
          {"head", detail::blocks_to_json(snap.adam_m.head)}}},
        {"v",
         {{"cell", detail::blocks_to_json(snap.adam_v.cell)},
          {"head", detail::blocks_to_json(snap.adam_v.head)}}},
    };
    j["epoch"] = snap.epoch;
    j["rng_state"] = snap.rng_state;
    j["train_config"] = train_config_to_json(snap.train_config);
    return j;
}

template <typename HeadT>
void head_from_json(const nlohmann::json& j, std::size_t hidden_dim, HeadT& head) {
    const std::size_t out_dim = j.at("out_dim").get<std::size_t>();
    head = ReadoutHead(out_dim, hidden_dim);
    detail::blocks_from_json(j.at("params"), head);
}

template <class Cell>
void snapshot_common_from_json(const nlohmann::json& j, TrainerSnapshot<Cell>& snap) {
    detail::blocks_from_json(j.at("params"), snap.model.cell.params);
    head_from_json(j.at("head"), snap.model.cell.hidden_dim(), snap.model.head);
    snap.adam_m = zero_grads_for(snap.model);
    snap.adam_v = zero_grads_for(snap.model);
    detail::blocks_from_json(j.at("optimizer").at("m").at("cell"), snap.adam_m.cell);
    detail::blocks_from_json(j.at("optimizer").at("m").at("head"), snap.adam_m.head);
    detail::blocks_from_json(j.at("optimizer").at("v").at("cell"), snap.adam_v.cell);
    detail::blocks_from_json(j.at("optimizer").at("v").at("head"), snap.adam_v.head);
    snap.adam_step = j.at("optimizer").at("step").get<std::uint64_t>();
    snap.epoch = j.at("epoch").get<std::size_t>();
    snap.rng_state = j.at("rng_state").get<std::uint64_t>();
    snap.train_config = train_config_from_json(j.at("train_config"));
}

}  // namespace

nlohmann::json snapshot_to_json(const TrainerSnapshot<PetnnCell>& snap) {
    return snapshot_to_json_impl(snap, "petnn", cell_config_to_json(snap.model.cell.cfg));
}

nlohmann::json snapshot_to_json(const TrainerSnapshot<RnnRefCell>& snap) {
    nlohmann::json cell = {
        {"input_dim", snap.model.cell.params.input_dim},
        {"hidden_dim", snap.model.cell.params.hidden_dim},
    };
    return snapshot_to_json_impl(snap, "rnn_ref", std::move(cell));
}

std::string snapshot_model_kind(const nlohmann::json& j) {
    return j.at("model_kind").get<std::string>();
}

TrainerSnapshot<PetnnCell> petnn_snapshot_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kFormatVersion)
        throw std::invalid_argument("petnn: unsupported format_version");
    if (snapshot_model_kind(j) != "petnn")
        throw std::invalid_argument("petnn: checkpoint is not a petnn model");
    TrainerSnapshot<PetnnCell> snap;
    snap.model.cell = PetnnCell(cell_config_from_json(j.at("cell_config")));
    snapshot_common_from_json(j, snap);
    return snap;
}

TrainerSnapshot<RnnRefCell> rnn_snapshot_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kFormatVersion)
        throw std::invalid_argument("petnn: unsupported format_version");
    if (snapshot_model_kind(j) != "rnn_ref")
        throw std::invalid_argument("petnn: checkpoint is not an rnn_ref model");
    TrainerSnapshot<RnnRefCell> snap;
    snap.model.cell = RnnRefCell(j.at("cell_config").at("input_dim").get<std::size_t>(),
                                 j.at("cell_config").at("hidden_dim").get<std::size_t>());
    snapshot_common_from_json(j, snap);
    return snap;
}

}  // namespace petnn
