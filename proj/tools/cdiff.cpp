// cdiff: data generation, training, sampling and evaluation of piecewise
// conditional diffusion models, plus the packaged studies.

#include "cdiff/binary_io.hpp"
#include "cdiff/datagen.hpp"
#include "cdiff/errors.hpp"
#include "cdiff/experiments/config.hpp"
#include "cdiff/experiments/manifest.hpp"
#include "cdiff/experiments/studies.hpp"
#include "cdiff/experiments/svg.hpp"
#include "cdiff/metrics.hpp"
#include "cdiff/sampler.hpp"
#include "cdiff/score_family.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <malloc.h>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cdiff;
using namespace cdiff::exp;

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::optional<int> workers;

  std::string generator;
  std::string params;
  std::optional<std::int64_t> n;
  bool csv = false;

  std::string data;
  std::string mode;
  std::string resume;
  std::optional<std::int64_t> step_offset;
  std::optional<int> steps;
  std::optional<int> batch;
  std::optional<double> lr;

  std::string model;
  std::string x;
  std::string x_file;
  std::optional<int> k;
  std::optional<int> substeps;
  std::string integrator;
  std::optional<double> truncation;

  std::optional<int> m;
  std::string metric;

  std::string ns;
  std::optional<int> monolithic_steps;
  std::string substeps_list;
};

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

// defaults <- config file <- flags
json resolve(const std::string& command, const Flags& f) {
  json cfg = default_config(command);
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw UsageError("config file not found: " + f.config);
    json file = config_from_file(f.config);
    if (file.contains("command") && file.at("command") != command)
      throw UsageError("config was written for '" + file.at("command").get<std::string>() + "', not '" + command + "'");
    cfg = merged(cfg, file);
  }
  json o = json::object();
  if (f.seed) o["seed"] = *f.seed;
  if (f.workers) {
    o["train"]["workers"] = *f.workers;
    o["sampler"]["workers"] = *f.workers;
    o["eval"]["workers"] = *f.workers;
  }
  if (!f.generator.empty() || !f.params.empty()) {
    json g = f.params.empty() ? json::object() : json::parse(f.params);
    if (!g.is_object()) throw UsageError("--params must be a JSON object");
    g["name"] = f.generator.empty() ? cfg["generator"].value("name", "bimodal1d") : f.generator;
    cfg["generator"] = g;
  }
  if (f.n) o["n"] = *f.n;
  if (f.csv) o["csv"] = true;
  if (!f.data.empty()) o["data"] = f.data;
  if (!f.mode.empty()) o["schedule"]["mode"] = f.mode;
  if (!f.resume.empty()) o["resume"] = f.resume;
  if (f.step_offset) o["step_offset"] = *f.step_offset;
  if (f.steps) o["train"]["steps_per_bin"] = *f.steps;
  if (f.batch) o["train"]["batch_size"] = *f.batch;
  if (f.lr) o["train"]["learning_rate"] = *f.lr;
  if (!f.model.empty()) o["model"] = f.model;
  if (!f.x.empty()) o["x"] = parse_doubles(f.x);
  if (!f.x_file.empty()) o["x_file"] = f.x_file;
  if (f.k) o["k"] = *f.k;
  if (f.substeps) o["sampler"]["substeps"] = *f.substeps;
  if (!f.integrator.empty()) o["sampler"]["integrator"] = f.integrator;
  if (f.truncation) o["sampler"]["truncation"] = *f.truncation;
  if (f.m) o["eval"]["covariates"] = *f.m;
  if (!f.metric.empty()) o["eval"]["metric"] = f.metric;
  if (f.k && (command == "evaluate" || command == "rate-study" || command == "ablation")) o["eval"]["samples"] = *f.k;
  if (!f.ns.empty()) {
    json list = json::array();
    for (double v : parse_doubles(f.ns)) list.push_back(static_cast<std::int64_t>(v));
    o["ns"] = list;
  }
  if (f.monolithic_steps) o["monolithic_steps"] = *f.monolithic_steps;
  if (!f.substeps_list.empty()) {
    json list = json::array();
    for (double v : parse_doubles(f.substeps_list)) list.push_back(static_cast<int>(v));
    o["substeps_list"] = list;
  }
  cfg = merged(cfg, o);
  cfg["command"] = command;
  return cfg;
}

std::string out_dir(const Flags& f, const std::string& command) {
  if (!f.out.empty()) return f.out;
  if (const char* env = std::getenv("CDIFF_OUT_DIR"); env && *env) return (fs::path(env) / command).string();
  return (fs::path("cdiff_out") / command).string();
}

std::string require_input(const json& cfg, const char* key, const char* what) {
  if (!cfg.contains(key) || !cfg.at(key).is_string() || cfg.at(key).get<std::string>().empty())
    throw UsageError(std::string("missing ") + what + " (--" + key + ")");
  const std::string path = cfg.at(key);
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
  return path;
}

// Writes the resolved config back next to the outputs.
void finish(Manifest& m, const std::string& dir) {
  fs::create_directories(dir);
  write_manifest(m, (fs::path(dir) / "manifest.json").string());
  std::cout << "wrote " << dir << "/manifest.json\n";
}

std::string loss_csv(const std::vector<LossTracePoint>& trace, bool timing) {
  std::ostringstream os;
  os.precision(17);
  os << (timing ? "bin,step,wall_ms\n" : "bin,step,loss\n");
  for (const auto& p : trace) os << p.bin << ',' << p.step << ',' << (timing ? p.wall_ms : p.loss) << '\n';
  return os.str();
}

int cmd_gen_data(const Flags& f) {
  json cfg = resolve("gen-data", f);
  const Pipeline p = pipeline_from_json(cfg);
  std::string dir = out_dir(f, "gen-data");
  std::string name = "data.cdrg";
  if (fs::path(dir).extension() == ".cdrg") {
    name = fs::path(dir).filename().string();
    dir = fs::path(dir).has_parent_path() ? fs::path(dir).parent_path().string() : ".";
  }
  const Dataset data = generate(p, p.n);
  Manifest m{"gen-data", cfg, {}, {}, {}};
  m.config["generator_resolved"] = p.generator.to_json();
  emit(m, dir, name, encode_dataset(data));
  if (cfg.value("csv", false)) emit(m, dir, fs::path(name).replace_extension(".csv").string(), dataset_to_csv(data));
  io::write_text_atomic((fs::path(dir) / (name + ".manifest.json")).string(), m.to_json().dump(2) + "\n");
  std::cout << "wrote " << (fs::path(dir) / name).string() << " (" << data.size() << " rows)\n";
  return 0;
}

int cmd_train(const Flags& f) {
  json cfg = resolve("train", f);
  const Pipeline p = pipeline_from_json(cfg);
  const std::string data_path = require_input(cfg, "data", "dataset");
  const std::string dir = out_dir(f, "train");
  Manifest m{"train", cfg, {{data_path, file_hash(data_path)}}, {}, {}};
  const Dataset data = load_dataset(data_path);
  if (data.x.cols() != p.generator.dim_x || data.y.cols() != p.generator.dim_y)
    throw UsageError("dataset dimensions do not match the generator spec");
  const auto n = static_cast<std::int64_t>(data.size());
  const Schedule schedule = schedule_for(p, n);

  TrainResult result;
  if (cfg.contains("resume") && cfg.at("resume").is_string()) {
    const std::string ckpt = require_input(cfg, "resume", "checkpoint");
    m.inputs[ckpt] = file_hash(ckpt);
    ScoreModel model = deserialize_model(io::read_file(ckpt));
    const std::int64_t offset = cfg.contains("step_offset") && cfg.at("step_offset").is_number()
                                    ? cfg.at("step_offset").get<std::int64_t>()
                                    : p.train.steps_per_bin;
    m.config["step_offset"] = offset;
    result = resume_training(data, std::move(model), p.train, offset);
  } else {
    result = train(data, problem_for(p.generator, n), schedule, p.ou, p.train);
  }

  json summary;
  summary["schedule"] = schedule.to_json();
  summary["theoretical_exponent"] = theoretical_exponent(p);
  json finals = json::array();
  for (int b = 0; b < result.model.partition().bins(); ++b) {
    double last = 0.0;
    for (const auto& t : result.trace)
      if (t.bin == b) last = t.loss;
    finals.push_back(last);
  }
  summary["final_loss_per_bin"] = finals;
  emit(m, dir, "model.cdsm", serialize_model(result.model));
  emit(m, dir, "loss.csv", loss_csv(result.trace, false));
  emit(m, dir, "schedule.json", summary.dump(2) + "\n");
  emit_unhashed(m, dir, "timing.csv", loss_csv(result.trace, true));
  std::cerr << "schedule: " << schedule.partition.bins() << " bins, tau=" << schedule.partition.tau()
            << ", T=" << schedule.partition.horizon() << "\n";
  finish(m, dir);
  return 0;
}

Mat read_covariates(const json& cfg, int dim_x, Manifest& m) {
  if (cfg.contains("x_file") && cfg.at("x_file").is_string()) {
    const std::string path = require_input(cfg, "x_file", "covariate file");
    m.inputs[path] = file_hash(path);
    const auto bytes = io::read_file(path);
    std::stringstream ss(std::string(bytes.begin(), bytes.end()));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(ss, line)) {
      if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      rows.push_back(parse_doubles(line));
    }
    Mat xs(static_cast<Eigen::Index>(rows.size()), dim_x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<int>(rows[i].size()) != dim_x)
        throw UsageError("covariate row " + std::to_string(i) + " has dimension " + std::to_string(rows[i].size()) +
                         ", model expects " + std::to_string(dim_x));
      for (int j = 0; j < dim_x; ++j) xs(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    if (xs.rows() == 0) throw UsageError("covariate file is empty");
    return xs;
  }
  const auto x = cfg.value("x", std::vector<double>{});
  if (static_cast<int>(x.size()) != dim_x)
    throw UsageError("covariate has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(dim_x));
  Mat xs(1, dim_x);
  for (int j = 0; j < dim_x; ++j) xs(0, j) = x[static_cast<std::size_t>(j)];
  return xs;
}

int cmd_sample(const Flags& f) {
  json cfg = resolve("sample", f);
  const Pipeline p = pipeline_from_json(cfg);
  const std::string path = require_input(cfg, "model", "checkpoint");
  const std::string dir = out_dir(f, "sample");
  Manifest m{"sample", cfg, {{path, file_hash(path)}}, {}, {}};
  const ScoreModel model = deserialize_model(io::read_file(path));
  const int dim_x = model.problem().dim_x;
  const int dim_y = model.problem().dim_y;
  const Mat xs = read_covariates(cfg, dim_x, m);
  const int k = cfg.value("k", 1000);
  if (k < 1) throw UsageError("k must be >= 1");

  const auto sampler = model_sampler(model, p.sampler);
  Dataset dump;
  dump.x.resize(xs.rows() * k, dim_x);
  dump.y.resize(xs.rows() * k, dim_y);
  std::ostringstream csv;
  csv.precision(17);
  csv << "covariate,chain";
  for (int j = 0; j < dim_y; ++j) csv << ",y" << j;
  csv << '\n';
  json per = json::array();
  int truncated = 0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Vec x = xs.row(i).transpose();
    const ConditionalDraw draw = sampler(x, k, static_cast<std::uint64_t>(i));
    truncated += draw.truncated;
    dump.y.middleRows(i * k, k) = draw.points;
    for (int c = 0; c < k; ++c) {
      dump.x.row(i * k + c) = xs.row(i);
      csv << i << ',' << c;
      for (int j = 0; j < dim_y; ++j) csv << ',' << draw.points(c, j);
      csv << '\n';
    }
    per.push_back({{"x", std::vector<double>(x.data(), x.data() + x.size())},
                   {"truncation_rate", static_cast<double>(draw.truncated) / k}});
  }
  json summary{{"k", k},
               {"covariates", xs.rows()},
               {"truncation", p.sampler.truncation},
               {"truncation_rate", static_cast<double>(truncated) / (static_cast<double>(k) * xs.rows())},
               {"per_covariate", per}};
  emit(m, dir, "samples.csv", csv.str());
  emit(m, dir, "samples.cdrg", encode_dataset(dump));
  emit(m, dir, "summary.json", summary.dump(2) + "\n");
  std::cout << "truncation rate " << summary["truncation_rate"].get<double>() << "\n";
  finish(m, dir);
  return 0;
}

int cmd_evaluate(const Flags& f) {
  json cfg = resolve("evaluate", f);
  const Pipeline p = pipeline_from_json(cfg);
  const std::string dir = out_dir(f, "evaluate");
  Manifest m{"evaluate", cfg, {}, {}, {}};
  const std::string which = cfg.value("model", std::string("truth"));
  std::optional<ScoreModel> model;
  ConditionalSampler sampler;
  if (which == "truth") {
    sampler = truth_sampler(p.generator, p.seed ^ 0x5EEDULL);
  } else if (which == "zero") {
    sampler = constant_sampler(Vec::Zero(p.generator.dim_y));
  } else if (which == "cond-mean") {
    sampler = cond_mean_sampler(p.generator);
  } else {
    const std::string path = require_input(cfg, "model", "checkpoint");
    m.inputs[path] = file_hash(path);
    model = deserialize_model(io::read_file(path));
    if (model->problem().dim_x != p.generator.dim_x || model->problem().dim_y != p.generator.dim_y)
      throw UsageError("checkpoint dimensions do not match the generator spec");
    sampler = model_sampler(*model, p.sampler);
  }
  const EvalReport report = expected_conditional_error(sampler, p.generator, p.eval);
  emit(m, dir, "report.json", report.to_json().dump(2) + "\n");
  emit(m, dir, "per_covariate.csv", report.to_csv());
  if (p.generator.dim_y == 1) {
    const Vec x = report.covariates.row(0).transpose();
    const Mat gen = sampler(x, p.eval.samples, 0).points;
    Rng rng = substream(p.eval.seed, {0x7121, 0});
    const Mat truth = sample_conditional(p.generator, x, p.eval.samples, rng);
    const auto col = [](const Mat& a) { return std::vector<double>(a.data(), a.data() + a.rows()); };
    emit(m, dir, "histogram.svg",
         svg_histogram({{"generated", col(gen)}, {"truth", col(truth)}}, -p.generator.radius, p.generator.radius, 40,
                       "samples at the first test covariate"));
  }
  std::cout << report.metric << " mean " << report.mean << " stderr " << report.stderr_ << " noise floor "
            << report.noise_floor << "\n";
  finish(m, dir);
  return 0;
}

int cmd_rate_study(const Flags& f) {
  json cfg = resolve("rate-study", f);
  const Pipeline p = pipeline_from_json(cfg);
  const auto ns = cfg.at("ns").get<std::vector<std::int64_t>>();
  const std::string dir = out_dir(f, "rate-study");
  Manifest m{"rate-study", cfg, {}, {}, {}};
  const RateStudyResult r = run_rate_study(p, ns, [](std::int64_t n, const Dataset&, const TrainResult&,
                                                     const EvalReport& rep) {
    std::cerr << "n=" << n << " mean " << rep.mean << " stderr " << rep.stderr_ << "\n";
  });
  emit(m, dir, "rate_study.json", r.to_json().dump(2) + "\n");
  emit(m, dir, "rate_study.csv", r.to_csv());
  emit(m, dir, "rate_study.svg", r.to_svg());
  std::cout << "slope " << r.fit.slope << " (theoretical exponent " << r.theoretical << ")\n";
  finish(m, dir);
  return 0;
}

int cmd_ablation(const Flags& f) {
  json cfg = resolve("ablation", f);
  const Pipeline p = pipeline_from_json(cfg);
  const std::string dir = out_dir(f, "ablation");
  Manifest m{"ablation", cfg, {}, {}, {}};
  AblationSettings s;
  s.budget_tolerance = cfg.value("budget_tolerance", 0.1);
  if (cfg.contains("monolithic_height") && cfg.at("monolithic_height").is_number()) s.monolithic_height = cfg.at("monolithic_height").get<int>();
  if (cfg.contains("monolithic_steps") && cfg.at("monolithic_steps").is_number()) s.monolithic_steps = cfg.at("monolithic_steps").get<int>();
  const AblationResult r = run_ablation(p, s);
  if (r.warning) std::cerr << "warning: " << *r.warning << "\n";
  emit(m, dir, "ablation.json", r.to_json().dump(2) + "\n");
  emit(m, dir, "ablation.svg", r.to_svg());
  std::cout << "piecewise " << r.piecewise.mean << " monolithic " << r.monolithic.mean << " ratio " << r.ratio() << "\n";
  finish(m, dir);
  return 0;
}

int cmd_oracle_check(const Flags& f) {
  json cfg = resolve("oracle-check", f);
  const Pipeline p = pipeline_from_json(cfg);
  if (!supports_analytic_score(p.generator))
    throw UsageError("generator " + p.generator.name() + " has no analytic score");
  const std::string dir = out_dir(f, "oracle-check");
  Manifest m{"oracle-check", cfg, {}, {}, {}};
  const auto x = cfg.value("x", std::vector<double>{});
  if (static_cast<int>(x.size()) != p.generator.dim_x) throw UsageError("--x must have dimension dim_x");
  const Vec xv = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
  const auto substeps = cfg.at("substeps_list").get<std::vector<int>>();
  const int k = cfg.value("k", 4096);
  const OracleResult r =
      run_oracle_check(p.generator, p.ou, schedule_for(p, p.n).partition, p.sampler, substeps, xv, k);
  Series err{"sliced W1", {}, {}, {}, true};
  Series floor{"noise floor", {}, {}, {}, true};
  for (const auto& row : r.rows) {
    err.x.push_back(row.substeps);
    err.y.push_back(row.error);
    floor.x.push_back(row.substeps);
    floor.y.push_back(row.noise_floor);
    std::cout << "substeps " << row.substeps << " sliced W1 " << row.error << " (floor " << row.noise_floor << ")\n";
  }
  emit(m, dir, "oracle.json", r.to_json().dump(2) + "\n");
  emit(m, dir, "oracle.csv", r.to_csv());
  emit(m, dir, "oracle.svg", svg_plot({err, floor}, "analytic-score sampler", "substeps per bin", "sliced W1", true, false));
  finish(m, dir);
  return 0;
}

void universal(CLI::App* sub, Flags& f) {
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--config", f.config, "JSON config or manifest");
  sub->add_option("--out", f.out, "output directory (default $CDIFF_OUT_DIR/<command>)");
  sub->add_option("--workers", f.workers, "worker threads (0 = all cores)");
}

void generator_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--generator", f.generator, "cond_gaussian | bimodal1d | circle_section | plane_section | curve_X");
  sub->add_option("--params", f.params, "generator parameters as a JSON object");
}

void pipeline_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--mode", f.mode, "euclidean | manifold");
  sub->add_option("--steps", f.steps, "training steps per network");
  sub->add_option("--batch", f.batch, "minibatch size");
  sub->add_option("--lr", f.lr, "Adam learning rate");
  sub->add_option("--substeps", f.substeps, "sampler steps per time bin");
  sub->add_option("--integrator", f.integrator, "euler_maruyama | exponential");
  sub->add_option("--truncation", f.truncation, "sup-norm truncation radius L");
  sub->add_option("--m", f.m, "test covariates");
  sub->add_option("--metric", f.metric, "auto | w1_1d | w1_exact | w1_sliced | tv");
}

int code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e)) return 4;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 4;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  // Batch-sized temporaries otherwise go through mmap/munmap on every step.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  CLI::App app{"Piecewise conditional diffusion models"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "sample a synthetic dataset");
  universal(gen, f);
  generator_flags(gen, f);
  gen->add_option("--n", f.n, "sample size");
  gen->add_flag("--csv", f.csv, "also write CSV");

  auto* tr = app.add_subcommand("train", "train the per-bin score networks");
  universal(tr, f);
  generator_flags(tr, f);
  pipeline_flags(tr, f);
  tr->add_option("--data", f.data, "CDRG dataset");
  tr->add_option("--resume", f.resume, "continue from a CDSM checkpoint");
  tr->add_option("--step-offset", f.step_offset, "steps already taken (default steps per bin)");

  auto* sm = app.add_subcommand("sample", "draw conditional samples from a checkpoint");
  universal(sm, f);
  generator_flags(sm, f);
  pipeline_flags(sm, f);
  sm->add_option("--model", f.model, "CDSM checkpoint");
  sm->add_option("--x", f.x, "covariate, comma separated");
  sm->add_option("--x-file", f.x_file, "covariates, one comma-separated row per line");
  sm->add_option("--k", f.k, "samples per covariate");

  auto* ev = app.add_subcommand("evaluate", "estimate E_x[distance] against the generator");
  universal(ev, f);
  generator_flags(ev, f);
  pipeline_flags(ev, f);
  ev->add_option("--model", f.model, "CDSM checkpoint, or truth | zero | cond-mean");
  ev->add_option("--k", f.k, "samples per covariate");

  auto* rs = app.add_subcommand("rate-study", "error versus sample size");
  universal(rs, f);
  generator_flags(rs, f);
  pipeline_flags(rs, f);
  rs->add_option("--ns", f.ns, "sample sizes, comma separated");
  rs->add_option("--k", f.k, "samples per covariate");

  auto* ab = app.add_subcommand("ablation", "piecewise versus single network");
  universal(ab, f);
  generator_flags(ab, f);
  pipeline_flags(ab, f);
  ab->add_option("--n", f.n, "sample size");
  ab->add_option("--k", f.k, "samples per covariate");
  ab->add_option("--monolithic-steps", f.monolithic_steps, "training steps for the single network");

  auto* oc = app.add_subcommand("oracle-check", "sampler with the analytic score");
  universal(oc, f);
  generator_flags(oc, f);
  pipeline_flags(oc, f);
  oc->add_option("--x", f.x, "covariate, comma separated");
  oc->add_option("--k", f.k, "samples");
  oc->add_option("--substeps-list", f.substeps_list, "substep counts, comma separated");
  oc->add_option("--n", f.n, "sample size that fixes the time partition");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_data(f);
    if (*tr) return cmd_train(f);
    if (*sm) return cmd_sample(f);
    if (*ev) return cmd_evaluate(f);
    if (*rs) return cmd_rate_study(f);
    if (*ab) return cmd_ablation(f);
    if (*oc) return cmd_oracle_check(f);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code_for(e);
  }
  return 2;
}
