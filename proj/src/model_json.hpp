#pragma once

#include <json.hpp>

#include "cpsdet/model.hpp"
#include "cpsdet/trainer.hpp"

// JSON encoding of model pieces, shared by the model file and checkpoint
// writers.
namespace cpsdet::detail {

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

nlohmann::json parameters_to_json(const ModelParameters& params);
// Shapes must be preallocated (make_zero_parameters); throws IoError naming
// any missing, extra, or wrongly sized array.
void parameters_from_json(const nlohmann::json& j, ModelParameters& params);

nlohmann::json normalization_to_json(const NormalizationSpec& norm);
NormalizationSpec normalization_from_json(const nlohmann::json& j,
                                          std::size_t p, std::size_t q);

}  // namespace cpsdet::detail
