#pragma once

// Run configuration: JSON blocks resolved as defaults <- config file <- flags.

#include "cdiff/datagen.hpp"
#include "cdiff/metrics.hpp"
#include "cdiff/sampler.hpp"
#include "cdiff/score_family.hpp"

#include "json.hpp"

#include <string>

namespace cdiff::exp {

// Full default config for a command (gen-data, train, sample, evaluate,
// rate-study, ablation, oracle-check).
nlohmann::json default_config(const std::string& command);

// Accepts either a plain config or a manifest (whose "config" block is used).
nlohmann::json config_from_file(const std::string& path);

// RFC 7396 merge of overrides into base.
nlohmann::json merged(nlohmann::json base, const nlohmann::json& overrides);

ScheduleMode mode_from_string(const std::string& name);
std::string to_string(ScheduleMode mode);
ScheduleConstants constants_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScheduleConstants& c);
ScheduleCaps caps_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScheduleCaps& c);
// {"delta": d} or {"times": [...], "deltas": [...]}.
OUSchedule ou_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OUSchedule& ou);

// Everything needed to go from a generator to an evaluated model.
struct Pipeline {
  GeneratorSpec generator;
  nlohmann::json generator_json;
  std::int64_t n = 8192;
  ScheduleMode mode = ScheduleMode::euclidean;
  ScheduleConstants constants;
  ScheduleCaps caps;
  OUSchedule ou;
  TrainConfig train;
  SamplerConfig sampler;
  EvalConfig eval;
  std::uint64_t seed = 0;
};

// Block seeds default to the master seed; sampler truncation defaults to 2 * radius.
Pipeline pipeline_from_json(const nlohmann::json& config);
nlohmann::json to_json(const Pipeline& p);

}  // namespace cdiff::exp
