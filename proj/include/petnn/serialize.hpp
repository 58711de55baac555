#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "petnn/train.hpp"

namespace petnn {

inline constexpr int kFormatVersion = 1;

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);
std::string variant_name(UpdateVariant v);
UpdateVariant variant_from_name(const std::string& name);
std::string loss_name(LossKind k);
LossKind loss_from_name(const std::string& name);

nlohmann::json cell_config_to_json(const CellConfig& cfg);
CellConfig cell_config_from_json(const nlohmann::json& j);

// {format_version, cell_config, params: {block: [row-major doubles]}}
nlohmann::json cell_params_to_json(const CellConfig& cfg, const CellParams& params);
CellParams cell_params_from_json(const nlohmann::json& j, CellConfig& cfg_out);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// write-temp-then-rename; the file either has the full content or does not exist
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// hex SHA-1 of "blob <len>\0<content>", the way git hashes file contents
std::string git_blob_sha1(const std::string& content);
std::string sha1_hex(const void* data, std::size_t len);

namespace detail {

template <typename ParamsT>
nlohmann::json blocks_to_json(const ParamsT& p) {
    nlohmann::json j = nlohmann::json::object();
    visit_params(const_cast<ParamsT&>(p), [&](const char* name, std::vector<double>& block) {
        j[name] = block;
    });
    return j;
}

template <typename ParamsT>
void blocks_from_json(const nlohmann::json& j, ParamsT& p) {
    visit_params(p, [&](const char* name, std::vector<double>& block) {
        if (!j.contains(name))
            throw std::invalid_argument(std::string("petnn: missing parameter block ") + name);
        const auto& arr = j.at(name);
        if (!arr.is_array() || arr.size() != block.size())
            throw std::invalid_argument(std::string("petnn: bad size for parameter block ") + name);
        for (std::size_t i = 0; i < block.size(); ++i) block[i] = arr[i].get<double>();
    });
}

}  // namespace detail

// Full training snapshot. Reloading one continues training bit-identically.
template <class Cell>
struct TrainerSnapshot {
    Model<Cell> model;
    ModelGrads<Cell> adam_m, adam_v;
    std::uint64_t adam_step = 0;
    std::size_t epoch = 0;
    std::uint64_t rng_state = 0;
    TrainConfig train_config;
};

nlohmann::json snapshot_to_json(const TrainerSnapshot<PetnnCell>& snap);
nlohmann::json snapshot_to_json(const TrainerSnapshot<RnnRefCell>& snap);
TrainerSnapshot<PetnnCell> petnn_snapshot_from_json(const nlohmann::json& j);
TrainerSnapshot<RnnRefCell> rnn_snapshot_from_json(const nlohmann::json& j);
std::string snapshot_model_kind(const nlohmann::json& j);

}  // namespace petnn
