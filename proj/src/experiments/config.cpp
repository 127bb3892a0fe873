#include "cdiff/experiments/config.hpp"

#include "cdiff/binary_io.hpp"
#include "cdiff/errors.hpp"

#include <cmath>

namespace cdiff::exp {

nlohmann::json merged(nlohmann::json base, const nlohmann::json& overrides) {
  base.merge_patch(overrides);
  return base;
}

ScheduleMode mode_from_string(const std::string& name) {
  if (name == "euclidean") return ScheduleMode::euclidean;
  if (name == "manifold") return ScheduleMode::manifold;
  throw SpecError("unknown schedule mode '" + name + "' (euclidean | manifold)");
}

std::string to_string(ScheduleMode mode) { return mode == ScheduleMode::manifold ? "manifold" : "euclidean"; }

ScheduleConstants constants_from_json(const nlohmann::json& j) {
  ScheduleConstants c;
  c.c_tau = j.value("c_tau", c.c_tau);
  c.c_horizon = j.value("c_horizon", c.c_horizon);
  c.c_height = j.value("c_height", c.c_height);
  c.c_width = j.value("c_width", c.c_width);
  c.c_sparsity = j.value("c_sparsity", c.c_sparsity);
  c.c_output = j.value("c_output", c.c_output);
  for (double v : {c.c_tau, c.c_horizon, c.c_height, c.c_width, c.c_sparsity, c.c_output})
    if (!(v > 0.0)) throw SpecError("schedule constants must be positive");
  return c;
}

nlohmann::json to_json(const ScheduleConstants& c) {
  return {{"c_tau", c.c_tau},     {"c_horizon", c.c_horizon},   {"c_height", c.c_height},
          {"c_width", c.c_width}, {"c_sparsity", c.c_sparsity}, {"c_output", c.c_output}};
}

ScheduleCaps caps_from_json(const nlohmann::json& j) {
  ScheduleCaps c;
  c.max_height = j.value("max_height", c.max_height);
  c.max_width = j.value("max_width", c.max_width);
  c.min_width = j.value("min_width", c.min_width);
  if (j.contains("weight_bound") && j.at("weight_bound").is_number()) c.weight_bound = j.at("weight_bound");
  c.enforce_sparsity = j.value("enforce_sparsity", c.enforce_sparsity);
  return c;
}

nlohmann::json to_json(const ScheduleCaps& c) {
  return {{"max_height", c.max_height},
          {"max_width", c.max_width},
          {"min_width", c.min_width},
          {"weight_bound", std::isfinite(c.weight_bound) ? nlohmann::json(c.weight_bound) : nlohmann::json(nullptr)},
          {"enforce_sparsity", c.enforce_sparsity}};
}

OUSchedule ou_from_json(const nlohmann::json& j) {
  if (j.contains("times")) {
    return OUSchedule::tabulated(j.at("times").get<std::vector<double>>(), j.at("deltas").get<std::vector<double>>());
  }
  return OUSchedule::constant(j.value("delta", 1.0));
}

nlohmann::json to_json(const OUSchedule& ou) {
  if (ou.kind() == OUSchedule::Kind::constant) return {{"delta", ou.delta0()}};
  return {{"times", ou.times()}, {"deltas", ou.deltas()}};
}

nlohmann::json default_config(const std::string& command) {
  const TrainConfig train;
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = 0;
  j["generator"] = {{"name", "bimodal1d"}};
  j["n"] = 8192;
  j["schedule"] = {{"mode", "euclidean"}, {"constants", to_json(ScheduleConstants{})}, {"caps", to_json(ScheduleCaps{})}};
  j["ou"] = {{"delta", 1.0}};
  j["train"] = train.to_json();
  j["train"]["seed"] = nullptr;
  j["sampler"] = {{"substeps", 8}, {"integrator", "euler_maruyama"}, {"truncation", nullptr}, {"seed", nullptr},
                  {"workers", 0}};
  j["eval"] = EvalConfig{}.to_json();
  j["eval"]["seed"] = nullptr;

  if (command == "gen-data") {
    j["csv"] = false;
  } else if (command == "train") {
    j["data"] = nullptr;
    j["resume"] = nullptr;
    j["step_offset"] = nullptr;
  } else if (command == "sample") {
    j["model"] = nullptr;
    j["x"] = nlohmann::json::array();
    j["x_file"] = nullptr;
    j["k"] = 1000;
  } else if (command == "evaluate") {
    j["model"] = "truth";
  } else if (command == "rate-study") {
    j["ns"] = {512, 1024, 2048, 4096, 8192};
    j["eval"]["samples"] = 2048;
  } else if (command == "ablation") {
    j["budget_tolerance"] = 0.1;
    j["monolithic_height"] = nullptr;
  } else if (command == "oracle-check") {
    j["generator"] = {{"name", "cond_gaussian"}, {"s", 1.0}, {"links", {{{"slope", 0.0}}}}};
    j["substeps_list"] = {2, 4, 8, 16};
    j["k"] = 4096;
    j["x"] = {0.0};
  } else {
    throw UsageError("unknown command '" + command + "'");
  }
  return j;
}

nlohmann::json config_from_file(const std::string& path) {
  const auto bytes = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw SpecError("config " + path + " must be a JSON object");
  if (j.contains("config") && j.contains("outputs")) return j.at("config");
  return j;
}

namespace {

std::uint64_t block_seed(const nlohmann::json& block, std::uint64_t master) {
  if (block.contains("seed") && block.at("seed").is_number()) return block.at("seed").get<std::uint64_t>();
  return master;
}

}  // namespace

Pipeline pipeline_from_json(const nlohmann::json& config) {
  Pipeline p;
  try {
    p.seed = config.value("seed", std::uint64_t{0});
    p.generator_json = config.value("generator", nlohmann::json{{"name", "bimodal1d"}});
    p.generator = generator_from_json(p.generator_json);
    p.n = config.value("n", p.n);
    if (p.n < 2) throw SpecError("n must be >= 2");
    const nlohmann::json sched = config.value("schedule", nlohmann::json::object());
    p.mode = mode_from_string(sched.value("mode", std::string("euclidean")));
    p.constants = constants_from_json(sched.value("constants", nlohmann::json::object()));
    p.caps = caps_from_json(sched.value("caps", nlohmann::json::object()));
    p.ou = ou_from_json(config.value("ou", nlohmann::json::object()));

    nlohmann::json train = config.value("train", nlohmann::json::object());
    train["seed"] = block_seed(train, p.seed);
    p.train = TrainConfig::from_json(train);

    nlohmann::json sampler = config.value("sampler", nlohmann::json::object());
    sampler["seed"] = block_seed(sampler, p.seed);
    if (!sampler.contains("truncation") || !sampler.at("truncation").is_number())
      sampler["truncation"] = 2.0 * p.generator.radius;
    p.sampler = SamplerConfig::from_json(sampler);
    p.sampler.validate();

    nlohmann::json eval = config.value("eval", nlohmann::json::object());
    eval["seed"] = block_seed(eval, p.seed);
    p.eval = EvalConfig::from_json(eval);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed config: ") + e.what());
  }
  return p;
}

nlohmann::json to_json(const Pipeline& p) {
  nlohmann::json j;
  j["seed"] = p.seed;
  j["generator"] = p.generator_json;
  j["n"] = p.n;
  j["schedule"] = {{"mode", to_string(p.mode)}, {"constants", to_json(p.constants)}, {"caps", to_json(p.caps)}};
  j["ou"] = to_json(p.ou);
  j["train"] = p.train.to_json();
  j["sampler"] = p.sampler.to_json();
  j["eval"] = p.eval.to_json();
  return j;
}

}  // namespace cdiff::exp
