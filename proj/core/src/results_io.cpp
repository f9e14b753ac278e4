#include "noisyhead/results_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "noisyhead/version.hpp"

namespace noisyhead {

namespace {

using nlohmann::json;

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_to_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
void optional_from_json(const json& j, const char* key, std::optional<T>& out) {
  out.reset();
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

json to_json(const Overrides& o) {
  return json{{"ridge_penalty", optional_to_json(o.ridge_penalty)},
              {"step_size", optional_to_json(o.step_size)},
              {"noise_scale", optional_to_json(o.noise_scale)},
              {"kappa", optional_to_json(o.kappa)},
              {"r_const", optional_to_json(o.r_const)},
              {"noise_const", optional_to_json(o.noise_const)},
              {"iterations", optional_to_json(o.iterations)},
              {"proof_form", o.proof_form}};
}

Overrides overrides_from_json(const json& j) {
  Overrides o;
  optional_from_json(j, "ridge_penalty", o.ridge_penalty);
  optional_from_json(j, "step_size", o.step_size);
  optional_from_json(j, "noise_scale", o.noise_scale);
  optional_from_json(j, "kappa", o.kappa);
  optional_from_json(j, "r_const", o.r_const);
  optional_from_json(j, "noise_const", o.noise_const);
  optional_from_json(j, "iterations", o.iterations);
  o.proof_form = j.value("proof_form", false);
  return o;
}

json to_json(const ExperimentConfig& c) {
  return json{{"suite", suite_name(c.suite)},
              {"batch_sizes", c.batch_sizes},
              {"epsilons", c.epsilons},
              {"iteration_grid", c.iteration_grid},
              {"poison_scales", c.poison_scales},
              {"poison_exponents", c.poison_exponents},
              {"dim", c.dim},
              {"context_len", c.context_len},
              {"tau2", c.tau2},
              {"delta", c.delta},
              {"feature_shift", c.feature_shift},
              {"n_test", c.n_test},
              {"trials", c.trials},
              {"master_seed", c.master_seed},
              {"threads", c.threads},
              {"overrides", to_json(c.overrides)}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const auto suite = suite_from_name(j.at("suite").get<std::string>());
  if (!suite) throw std::invalid_argument("manifest names an unknown suite");
  c.suite = *suite;
  c.batch_sizes = j.at("batch_sizes").get<std::vector<int>>();
  c.epsilons = j.at("epsilons").get<std::vector<double>>();
  c.iteration_grid = j.at("iteration_grid").get<std::vector<int>>();
  c.poison_scales = j.at("poison_scales").get<std::vector<double>>();
  c.poison_exponents = j.at("poison_exponents").get<std::vector<double>>();
  c.dim = j.at("dim").get<int>();
  c.context_len = j.at("context_len").get<int>();
  c.tau2 = j.at("tau2").get<double>();
  c.delta = j.at("delta").get<double>();
  c.feature_shift = j.at("feature_shift").get<double>();
  c.n_test = j.at("n_test").get<int>();
  c.trials = j.at("trials").get<int>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.threads = j.at("threads").get<int>();
  c.overrides = overrides_from_json(j.at("overrides"));
  return c;
}

json to_json(const HyperParams& h) {
  return json{{"response_variance", h.response_variance},
              {"clip_bound", h.clip_bound},
              {"feature_radius", h.feature_radius},
              {"test_feature_radius", h.test_feature_radius},
              {"param_radius", h.param_radius},
              {"confidence", h.confidence},
              {"ridge_penalty", h.ridge_penalty},
              {"step_size", h.step_size},
              {"iterations", h.iterations},
              {"noise_scale", h.noise_scale}};
}

HyperParams hyper_from_json(const json& j) {
  HyperParams h;
  h.response_variance = j.at("response_variance").get<double>();
  h.clip_bound = j.at("clip_bound").get<double>();
  h.feature_radius = j.at("feature_radius").get<double>();
  h.test_feature_radius = j.at("test_feature_radius").get<double>();
  h.param_radius = j.at("param_radius").get<double>();
  h.confidence = j.at("confidence").get<double>();
  h.ridge_penalty = j.at("ridge_penalty").get<double>();
  h.step_size = j.at("step_size").get<double>();
  h.iterations = j.at("iterations").get<int>();
  h.noise_scale = j.at("noise_scale").get<double>();
  return h;
}

json to_json(const GridPointInfo& p) {
  return json{{"grid_values", p.grid_values},
              {"batch_size", p.batch_size},
              {"sampler",
               json{{"dim", p.sampler.dim},
                    {"context_len", p.sampler.context_len},
                    {"noise_var", p.sampler.noise_var}}},
              {"hyper", to_json(p.hyper)},
              {"budget", json{{"epsilon", p.budget.epsilon}, {"delta", p.budget.delta}}},
              {"feature_shift", p.feature_shift},
              {"response_shift", p.response_shift}};
}

GridPointInfo point_from_json(const json& j) {
  GridPointInfo p;
  p.grid_values = j.at("grid_values").get<std::vector<double>>();
  p.batch_size = j.at("batch_size").get<int>();
  const json& s = j.at("sampler");
  p.sampler = SamplerConfig{s.at("dim").get<int>(), s.at("context_len").get<int>(),
                            s.at("noise_var").get<double>()};
  p.hyper = hyper_from_json(j.at("hyper"));
  p.budget = PrivacyBudget{j.at("budget").at("epsilon").get<double>(),
                           j.at("budget").at("delta").get<double>()};
  p.feature_shift = j.at("feature_shift").get<double>();
  p.response_shift = j.at("response_shift").get<double>();
  return p;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad numeric field '" + s + "'");
  }
  return value;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return {buf, ptr};
}

std::string format_grid_value(double value) {
  if (std::isfinite(value) && value == std::floor(value) && std::abs(value) < 9.0e15) {
    return std::to_string(static_cast<long long>(value));
  }
  return format_double(value);
}

RunManifest make_manifest(const ExperimentConfig& cfg) {
  RunManifest manifest;
  manifest.suite = suite_name(cfg.suite);
  manifest.version = kVersion;
  manifest.timestamp = utc_timestamp();
  manifest.config = cfg;
  manifest.resolved = resolve_grid(cfg);
  return manifest;
}

std::string manifest_to_json(const RunManifest& manifest) {
  json resolved = json::array();
  for (const auto& point : manifest.resolved) resolved.push_back(to_json(point));
  const json j{{"suite", manifest.suite},
               {"version", manifest.version},
               {"timestamp", manifest.timestamp},
               {"config", to_json(manifest.config)},
               {"resolved", resolved}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest manifest;
  manifest.suite = j.at("suite").get<std::string>();
  manifest.version = j.at("version").get<std::string>();
  manifest.timestamp = j.at("timestamp").get<std::string>();
  manifest.config = config_from_json(j.at("config"));
  for (const auto& p : j.at("resolved")) manifest.resolved.push_back(point_from_json(p));
  return manifest;
}

std::filesystem::path write_manifest(const RunManifest& manifest,
                                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / "manifest.json";
  auto out = open_for_write(path);
  out << manifest_to_json(manifest);
  if (!out) throw std::runtime_error("failed writing " + path.string());
  return path;
}

OutputPaths write_results(const SummaryTable& table, const std::vector<TrialRecord>& records,
                          const RunManifest& manifest, const std::filesystem::path& out_dir) {
  OutputPaths paths;
  paths.manifest = write_manifest(manifest, out_dir);

  paths.summary = out_dir / "summary.csv";
  {
    auto out = open_for_write(paths.summary);
    for (const auto& col : table.grid_columns) out << col << ',';
    for (const auto& name : table.metric_names) out << name << "_mean," << name << "_se,";
    out << "B\n";
    for (const auto& row : table.rows) {
      for (double v : row.grid_values) out << format_grid_value(v) << ',';
      for (std::size_t j = 0; j < table.metric_names.size(); ++j) {
        out << format_double(row.means[j]) << ',' << format_double(row.ses[j]) << ',';
      }
      out << row.trials << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + paths.summary.string());
  }

  paths.trials = out_dir / "trials.csv";
  {
    auto out = open_for_write(paths.trials);
    for (const auto& col : table.grid_columns) out << col << ',';
    out << "trial";
    for (const auto& name : table.metric_names) out << ',' << name;
    out << '\n';
    for (const auto& record : records) {
      if (record.grid_index >= manifest.resolved.size()) {
        throw std::runtime_error("trial record points beyond the resolved grid");
      }
      for (double v : manifest.resolved[record.grid_index].grid_values) {
        out << format_grid_value(v) << ',';
      }
      out << record.trial_id;
      for (const auto& [name, value] : record.metrics) {
        (void)name;
        out << ',' << format_double(value);
      }
      out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + paths.trials.string());
  }
  return paths;
}

SummaryTable read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty summary file " + path.string());
  const auto header = split_csv_line(line);
  if (header.empty() || header.back() != "B") {
    throw std::runtime_error("summary header must end with B");
  }

  SummaryTable table;
  std::size_t i = 0;
  while (i < header.size() - 1 && header[i].find("_mean") == std::string::npos) {
    table.grid_columns.push_back(header[i]);
    ++i;
  }
  while (i + 1 < header.size() - 1) {
    const std::string& mean_col = header[i];
    const auto pos = mean_col.rfind("_mean");
    if (pos == std::string::npos) throw std::runtime_error("expected metric mean column");
    table.metric_names.push_back(mean_col.substr(0, pos));
    i += 2;
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    SummaryRow row;
    std::size_t f = 0;
    for (std::size_t g = 0; g < table.grid_columns.size(); ++g) row.grid_values.push_back(parse_double(fields.at(f++)));
    for (std::size_t m = 0; m < table.metric_names.size(); ++m) {
      row.means.push_back(parse_double(fields.at(f++)));
      row.ses.push_back(parse_double(fields.at(f++)));
    }
    row.trials = static_cast<int>(parse_double(fields.at(f++)));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trials file " + path.string());
  const auto header = split_csv_line(line);
  std::size_t trial_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "trial") {
      trial_col = i;
      break;
    }
  }
  if (trial_col == header.size()) throw std::runtime_error("trials header lacks a trial column");

  std::vector<TrialRecord> records;
  std::vector<std::vector<double>> seen_grid_values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    TrialRecord record;
    std::vector<double> grid_values;
    for (std::size_t i = 0; i < trial_col; ++i) grid_values.push_back(parse_double(fields.at(i)));
    record.trial_id = static_cast<int>(parse_double(fields.at(trial_col)));
    for (std::size_t i = trial_col + 1; i < header.size(); ++i) {
      record.metrics.emplace_back(header[i], parse_double(fields.at(i)));
    }
    std::size_t g = 0;
    for (; g < seen_grid_values.size(); ++g) {
      if (seen_grid_values[g] == grid_values) break;
    }
    if (g == seen_grid_values.size()) seen_grid_values.push_back(grid_values);
    record.grid_index = g;
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace noisyhead
