#pragma once

#include <string>

#include "json.hpp"
#include "usddps/metrics.hpp"
#include "usddps/sampler.hpp"
#include "usddps/synth.hpp"

namespace usddps {

using Json = nlohmann::ordered_json;

Json to_json(const SceneSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
SceneSpec scene_spec_from_json(const Json& j);

Json to_json(const SamplerConfig& cfg);
// Overrides the fields present in j; unknown keys are rejected.
void apply_json(const Json& j, SamplerConfig& cfg);

Json to_json(const StepTrace& t);
Json to_json(const EvalReport& r);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace usddps
