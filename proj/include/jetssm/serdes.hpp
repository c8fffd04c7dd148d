#pragma once

#include <json.hpp>

#include "jetssm/dataset.hpp"
#include "jetssm/neural_net.hpp"

namespace jetssm {

// JSON bindings for the config/report structs (ADL hooks for nlohmann).

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);

void to_json(nlohmann::json& j, const StairsSchedule& s);
void from_json(const nlohmann::json& j, StairsSchedule& s);

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct TrainConfig;
struct TrialSpace;
struct EvalReport;

}  // namespace jetssm

// TrainConfig/TrialSpace/EvalReport live in training.hpp; their bindings are
// declared after the include to avoid a cycle.
#include "jetssm/training.hpp"

namespace jetssm {

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const TrialSpace& s);
void from_json(const nlohmann::json& j, TrialSpace& s);

void to_json(nlohmann::json& j, const EvalReport& r);

}  // namespace jetssm
