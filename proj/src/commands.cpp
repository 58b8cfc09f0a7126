#include "nexus/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "nexus/calibration.hpp"
#include "nexus/metrics.hpp"
#include "nexus/parallel.hpp"

namespace nexus {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------------------------------------- files

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& doc) {
  write_text(path, doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

namespace {

json read_json(const fs::path& path) {
  auto doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::MalformedCsv, "not valid JSON: " + path.string());
  return doc;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json trace_json(const std::vector<Exchange>& trace) {
  auto out = json::array();
  for (const auto& e : trace) out.push_back(to_json(e));
  return out;
}

}  // namespace

// ------------------------------------------------------------------------------------------------- data

std::vector<MultimodalContext> load_dataset(const DatasetConfig& d) {
  std::vector<MultimodalContext> out;
  for (const auto& entity : d.entities) {
    MultimodalContext ctx;
    ctx.series = load_series(d.series_dir / (entity + ".csv"), entity);
    ctx.target_name = d.target_name;
    ctx.domain_label = d.domain;
    if (!d.events_dir.empty()) {
      const auto path = d.events_dir / (entity + ".csv");
      ctx.events = fs::exists(path) ? align_events(ctx.series, load_events(path)) : EventStream{};
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

MultimodalContext pre_eval_history(const MultimodalContext& full, Date eval_start) {
  MultimodalContext out = full;
  auto& pts = out.series.points;
  pts.erase(std::remove_if(pts.begin(), pts.end(), [&](const SeriesPoint& p) { return !(p.date < eval_start); }),
            pts.end());
  if (out.events) {
    auto& ev = out.events->entries;
    ev.erase(std::remove_if(ev.begin(), ev.end(), [&](const EventEntry& e) { return !(e.date < eval_start); }), ev.end());
  }
  return out;
}

fs::path cell_dir(const fs::path& out, const ForecastTask& task) {
  return out / task.dataset / task.entity_id / std::to_string(task.horizon) / std::string(to_string(task.setting));
}

json task_record(const ForecastTask& task, int task_index, const std::string& method, const ForecastResult& result,
                 const PipelineRun* run, const std::optional<std::string>& guidelines) {
  json future = json::array();
  for (const auto& d : task.future_dates()) future.push_back(d.iso());
  json doc{{"dataset", task.dataset},
           {"entity", task.entity_id},
           {"horizon", task.horizon},
           {"setting", to_string(task.setting)},
           {"task_index", task_index},
           {"method", method},
           {"origin_index", task.origin_index},
           {"origin_date", task.last_context_date().iso()},
           {"context_length", task.context_length},
           {"future_dates", future},
           {"truth", task.truth_values()},
           {"ground_truth_events", task.truth.empty() ? std::string() : describe_ground_truth(task)},
           {"values", result.values},
           {"reasoning", result.reasoning},
           {"guidelines", guidelines ? json(*guidelines) : json()}};
  if (run) {
    json timeline = json::array();
    for (const auto& e : run->timeline.entries) {
      timeline.push_back({{"date", e.date}, {"value", e.value}, {"content", e.content}});
    }
    doc["timeline"] = timeline;
    doc["macro"] = run->macro ? json{{"values", run->macro->values}, {"narrative", run->macro->narrative}} : json();
    if (run->micro) {
      json steps = json::array();
      for (const auto& s : run->micro->outlook.steps) {
        steps.push_back({{"timestamp", s.timestamp},
                         {"date", s.date},
                         {"day_info", s.day_info},
                         {"movement", to_string(s.movement)},
                         {"key_drivers", s.key_drivers},
                         {"value", s.adjusted_forecast_value}});
      }
      doc["micro"] = steps;
    } else {
      doc["micro"] = json();
    }
  }
  doc["trace"] = trace_json(result.trace);
  return doc;
}

// --------------------------------------------------------------------------------------- forecast/baseline

namespace {

struct Cell {
  const DatasetConfig* dataset;
  const MultimodalContext* context;
  int horizon;
  Setting setting;
  std::vector<ForecastTask> tasks;
};

std::vector<Cell> build_cells(const RunConfig& config, const std::vector<std::vector<MultimodalContext>>& data) {
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < config.datasets.size(); ++d) {
    const auto& ds = config.datasets[d];
    for (const auto& ctx : data[d]) {
      for (int h : ds.horizons) {
        for (Setting s : config.settings) {
          Cell c{&ds, &ctx, h, s, make_tasks(ctx, ds.eval_start, ds.eval_end, h, ds.context_length, 1, s)};
          for (auto& t : c.tasks) t.dataset = ds.name;
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

std::vector<std::vector<MultimodalContext>> load_all(const RunConfig& config) {
  std::vector<std::vector<MultimodalContext>> data;
  for (const auto& d : config.datasets) data.push_back(load_dataset(d));
  return data;
}

json manifest(const RunConfig& config, const std::string& method, TemplateId final_agent) {
  json models = json::object();
  const std::vector<TemplateId> used =
      method == "cot" ? std::vector<TemplateId>{TemplateId::CotBaseline}
                      : std::vector<TemplateId>{TemplateId::ContextAgent, TemplateId::MacroAgent, TemplateId::MicroAgent,
                                                TemplateId::ValuePredictor, TemplateId::CalibrationAgent,
                                                TemplateId::GuidelineConsolidation};
  for (TemplateId id : used) {
    const auto a = config.agent(id);
    models[std::string(to_string(id))] = {{"backend", backend_id(a.backend)}, {"model", a.model}, {"temperature", a.temperature}};
  }
  json datasets = json::array();
  for (const auto& d : config.datasets) datasets.push_back(d.name);
  json settings = json::array();
  for (Setting s : config.settings) settings.push_back(to_string(s));
  json doc{{"method", method},
           {"model", config.agent(final_agent).model},
           {"models", models},
           {"datasets", datasets},
           {"settings", settings},
           {"seed", config.seed}};
  if (method != "cot") {
    doc["ablations"] = {{"disable_macro", config.disable_macro},
                        {"disable_micro", config.disable_micro},
                        {"disable_calibration", config.disable_calibration}};
    doc["calibration"] = {{"n", config.n}, {"k", config.k}, {"support", config.support == SupportRule::All ? "all" : "majority"}};
  }
  return doc;
}

void require_out(const RunConfig& config) {
  if (config.out_dir.empty()) throw Error(ErrorKind::Config, "no output directory (use --out or [run] out)");
  if (config.datasets.empty()) throw Error(ErrorKind::Config, "config defines no [dataset:<name>] section");
}

}  // namespace

void cmd_forecast(const RunConfig& config) {
  config.validate();
  require_out(config);
  const auto data = load_all(config);
  auto cells = build_cells(config, data);

  PipelineConfig pipeline;
  pipeline.enable_macro = !config.disable_macro;
  pipeline.enable_micro = !config.disable_micro;
  pipeline.router = make_router(config);
  pipeline.validate();

  std::vector<std::optional<std::string>> guidelines(cells.size());
  if (!config.disable_calibration) {
    parallel_for(cells.size(), config.workers, [&](std::size_t i) {
      const Cell& c = cells[i];
      CalibrationConfig cal;
      cal.n = config.n;
      cal.k = config.k;
      cal.horizon = c.horizon;
      cal.context_length = c.dataset->context_length;
      cal.setting = c.setting;
      cal.support = config.support;
      cal.mode = config.consolidation;
      cal.workers = 1;
      const auto outcome = calibrate_entity(pre_eval_history(*c.context, c.dataset->eval_start), cal, pipeline);
      guidelines[i] = outcome.accepted_guidelines();
      ForecastTask probe = c.tasks.front();
      write_json(cell_dir(config.out_dir, probe) / "calibration.json", to_json(outcome));
    });
  }

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t t = 0; t < cells[c].tasks.size(); ++t) jobs.emplace_back(c, t);
  }
  parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
    const auto [c, t] = jobs[j];
    const ForecastTask& task = cells[c].tasks[t];
    PipelineConfig cfg = pipeline;
    cfg.guidelines = guidelines[c];
    const PipelineRun run = run_pipeline(task, cfg);
    write_json(cell_dir(config.out_dir, task) / fmt::format("task_{}.json", t),
               task_record(task, static_cast<int>(t), "nexus", run.result, &run, guidelines[c]));
  });
  write_json(config.out_dir / "run.json", manifest(config, "nexus", TemplateId::ValuePredictor));
}

void cmd_baseline(const RunConfig& config) {
  config.validate();
  require_out(config);
  const auto data = load_all(config);
  const auto cells = build_cells(config, data);
  const AgentRouter router = make_router(config);

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t t = 0; t < cells[c].tasks.size(); ++t) jobs.emplace_back(c, t);
  }
  parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
    const auto [c, t] = jobs[j];
    const ForecastTask& task = cells[c].tasks[t];
    const ForecastResult result = cot_forecast(task, router);
    write_json(cell_dir(config.out_dir, task) / fmt::format("task_{}.json", t),
               task_record(task, static_cast<int>(t), "cot", result, nullptr, std::nullopt));
  });
  write_json(config.out_dir / "run.json", manifest(config, "cot", TemplateId::CotBaseline));
}

// ------------------------------------------------------------------------------------------------ evaluate

namespace {

struct LoadedRun {
  json manifest;
  /// Keyed by "<dataset>/<entity>/<horizon>/<setting>/task_<i>".
  std::map<std::string, json> tasks;
};

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingRuns, "run directory not found: " + dir.string());
  if (!fs::exists(dir / "run.json")) throw Error(ErrorKind::MissingRuns, "no run.json in " + dir.string());
  LoadedRun run;
  run.manifest = read_json(dir / "run.json");
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.rfind("task_", 0) != 0 || entry.path().extension() != ".json") continue;
    auto doc = read_json(entry.path());
    const std::string key = fmt::format("{}/{}/{}/{}/task_{}", doc.at("dataset").get<std::string>(),
                                        doc.at("entity").get<std::string>(), doc.at("horizon").get<int>(),
                                        doc.at("setting").get<std::string>(), doc.at("task_index").get<int>());
    run.tasks.emplace(key, std::move(doc));
  }
  if (run.tasks.empty()) throw Error(ErrorKind::MissingRuns, "no task records under " + dir.string());
  return run;
}

}  // namespace

MetricReport cmd_evaluate(const EvaluateOptions& options) {
  if (options.run_dirs.empty()) throw Error(ErrorKind::MissingRuns, "no run directories given");
  std::vector<ScoredForecast> scored;
  std::vector<LoadedRun> runs;
  for (const auto& dir : options.run_dirs) runs.push_back(load_run(dir));

  for (const auto& run : runs) {
    const std::string method = run.manifest.at("method").get<std::string>();
    for (const auto& [key, t] : run.tasks) {
      auto truth = t.at("truth").get<std::vector<double>>();
      if (truth.empty()) continue;
      scored.push_back(ScoredForecast{t.at("dataset"), t.at("setting"), method, t.at("horizon"), std::move(truth),
                                      t.at("values").get<std::vector<double>>()});
    }
  }

  for (const auto& ext : options.external) {
    std::map<fs::path, std::map<Date, std::vector<double>>> files;
    for (const auto& [key, t] : runs.front().tasks) {
      auto truth = t.at("truth").get<std::vector<double>>();
      if (truth.empty()) continue;
      const int h = t.at("horizon");
      const fs::path file = ext.dir / t.at("dataset").get<std::string>() / t.at("entity").get<std::string>() /
                            std::to_string(h) / "forecasts.csv";
      auto it = files.find(file);
      if (it == files.end()) {
        if (!fs::exists(file)) throw Error(ErrorKind::MissingRuns, "external forecasts not found: " + file.string());
        it = files.emplace(file, load_external_forecasts(file)).first;
      }
      const auto origin = Date::parse(t.at("origin_date").get<std::string>());
      auto f = origin ? it->second.find(*origin) : it->second.end();
      if (f == it->second.end() || static_cast<int>(f->second.size()) < h) {
        throw Error(ErrorKind::MissingRuns,
                    fmt::format("{} has no {}-step forecast from {}", file.string(), h, t.at("origin_date").get<std::string>()));
      }
      scored.push_back(ScoredForecast{t.at("dataset"), t.at("setting"), ext.method, h, std::move(truth),
                                      std::vector<double>(f->second.begin(), f->second.begin() + h)});
    }
  }
  if (scored.empty()) throw Error(ErrorKind::MissingRuns, "no task record carries ground truth");

  const MetricReport report = aggregate(scored, options.average);
  if (!options.out_dir.empty()) {
    write_json(options.out_dir / "report.json", to_json(report));
    write_text(options.out_dir / "report.md", to_markdown(report, options.comparison));
  }
  return report;
}

// --------------------------------------------------------------------------------------------------- judge

namespace {

std::string method_label(const std::string& method) {
  if (method == "nexus") return "NEXUS";
  if (method == "cot") return "CoT Baseline";
  return method;
}

}  // namespace

TallyTable cmd_judge(const JudgeOptions& options) {
  const LoadedRun treatment = load_run(options.treatment_dir);
  const LoadedRun baseline = load_run(options.baseline_dir);
  std::vector<std::string> keys;
  for (const auto& [k, _] : treatment.tasks) keys.push_back(k);
  std::vector<std::string> other;
  for (const auto& [k, _] : baseline.tasks) other.push_back(k);
  if (keys != other) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(keys.begin(), keys.end(), other.begin(), other.end(), std::back_inserter(diff));
    throw Error(ErrorKind::TaskSetMismatch,
                fmt::format("runs cover different tasks ({} differ, e.g. {})", diff.size(), diff.front()));
  }
  if (options.sample) {
    if (*options.sample < 1) throw Error(ErrorKind::Config, "--sample must be positive");
    if (*options.sample < static_cast<int>(keys.size())) {
      std::mt19937_64 rng(options.seed);
      std::shuffle(keys.begin(), keys.end(), rng);
      keys.resize(*options.sample);
      std::sort(keys.begin(), keys.end());
    }
  }

  const std::string t_method = treatment.manifest.at("method");
  const std::string b_method = baseline.manifest.at("method");
  const std::string t_model = treatment.manifest.value("model", "");
  const std::string b_model = baseline.manifest.value("model", "");

  std::vector<TalliedVerdict> verdicts(keys.size());
  std::vector<json> records(keys.size());
  parallel_for(keys.size(), options.workers, [&](std::size_t i) {
    const json& a = treatment.tasks.at(keys[i]);
    const json& b = baseline.tasks.at(keys[i]);
    const std::uint64_t seed = options.seed * 0x9E3779B97F4A7C15ull + i;
    const JudgePair pair = assign_positions(
        JudgeCandidate{t_method, t_model, a.at("reasoning"), a.at("values").get<std::vector<double>>()},
        JudgeCandidate{b_method, b_model, b.at("reasoning"), b.at("values").get<std::vector<double>>()},
        a.at("ground_truth_events"), seed);
    std::vector<Exchange> trace;
    const MethodVerdict verdict = judge_pair(pair, options.judge, trace);
    verdicts[i] = TalliedVerdict{fmt::format("{} / {}", t_model, a.at("dataset").get<std::string>()), verdict};
    json rec = to_json(verdict);
    rec["task"] = keys[i];
    rec["seed"] = seed;
    rec["trace"] = trace_json(trace);
    records[i] = std::move(rec);
  });

  const TallyTable table = tally(verdicts, t_method, b_method);
  if (!options.out_dir.empty()) {
    write_json(options.out_dir / "verdicts.json", json(records));
    write_json(options.out_dir / "tally.json", to_json(table));
    write_text(options.out_dir / "tally.md", to_markdown(table, method_label(t_method), method_label(b_method)));
  }
  return table;
}

// --------------------------------------------------------------------------------------------------- synth

void cmd_synth(const SynthOptions& o) {
  if (o.out_dir.empty()) throw Error(ErrorKind::Config, "synth needs --out");
  if (o.entities < 1) throw Error(ErrorKind::Config, "entities must be >= 1");
  if (o.horizons.empty()) throw Error(ErrorKind::Config, "synth needs at least one horizon");
  const int max_h = *std::max_element(o.horizons.begin(), o.horizons.end());
  if (o.eval_points < max_h || o.length - o.eval_points < o.context_length) {
    throw Error(ErrorKind::Config, "length too short for the requested context and evaluation window");
  }
  std::vector<std::string> names;
  Date eval_start, eval_end;
  for (int e = 0; e < o.entities; ++e) {
    SynthSpec spec;
    spec.entity_id = fmt::format("entity_{:02d}", e + 1);
    spec.length = o.length;
    spec.event_rate = o.event_rate;
    spec.trend = 0.2 + 0.1 * e;
    spec.seasonal_period = e % 2 == 0 ? 13 : 0;
    spec.seasonal_amplitude = 4.0;
    spec.target_name = "Synthetic Index";
    spec.domain_label = "Synthetic Market";
    const MultimodalContext ctx = synth_context(spec, o.seed + static_cast<std::uint64_t>(e));
    std::string series = "date,value\n";
    for (const auto& p : ctx.series.points) {
      series += fmt::format("{},{}\n", p.date.iso(), format_number(std::round(p.value * 100.0) / 100.0));
    }
    std::string events = "date,text\n";
    for (const auto& ev : ctx.events->entries) events += fmt::format("{},{}\n", ev.date.iso(), csv_field(ev.text));
    write_text(o.out_dir / "series" / (spec.entity_id + ".csv"), series);
    write_text(o.out_dir / "events" / (spec.entity_id + ".csv"), events);
    names.push_back(spec.entity_id);
    eval_start = ctx.series.points[o.length - o.eval_points].date;
    eval_end = ctx.series.points.back().date;
  }
  std::vector<std::string> quoted;
  for (const auto& n : names) quoted.push_back("\"" + n + "\"");
  std::vector<std::string> hs;
  for (int h : o.horizons) hs.push_back(std::to_string(h));
  const std::string config = fmt::format(
      "# Synthetic demo generated by `nexus synth --seed {}`.\n"
      "[run]\n"
      "out = \"runs/nexus\"\n"
      "seed = {}\n"
      "workers = 4\n"
      "setting = \"multimodal\"\n"
      "\n"
      "[calibration]\n"
      "n = 6\n"
      "k = 0.05\n"
      "support = \"majority\"\n"
      "\n"
      "[llm]\n"
      "backend = \"scripted:.\"\n"
      "model = \"simulated-analyst\"\n"
      "temperature = 0.1\n"
      "\n"
      "[judge]\n"
      "backend = \"scripted:.\"\n"
      "model = \"simulated-judge\"\n"
      "\n"
      "[dataset:synthetic]\n"
      "entities = [{}]\n"
      "series_dir = \"series\"\n"
      "events_dir = \"events\"\n"
      "eval_start = \"{}\"\n"
      "eval_end = \"{}\"\n"
      "horizons = [{}]\n"
      "context_length = {}\n"
      "domain = \"Synthetic Market\"\n"
      "target_name = \"Synthetic Index\"\n",
      o.seed, o.seed, fmt::join(quoted, ", "), eval_start.iso(), eval_end.iso(), fmt::join(hs, ", "), o.context_length);
  write_text(o.out_dir / "demo.toml", config);
  write_text(o.out_dir / "script.json", "{\n  \"fallback\": \"analyst\"\n}\n");
}

}  // namespace nexus
