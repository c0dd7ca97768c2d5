#include "gfs/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gfs {

namespace {

std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (int x : v) out.push_back(x + 1);
  return out;
}

std::string name_of(int f, const std::vector<std::string>& names) {
  return f < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(f)] : "x" + std::to_string(f + 1);
}

void expect_schema(const nlohmann::json& j, const char* schema) {
  if (!j.contains("schema") || !j["schema"].is_string() || j["schema"].get<std::string>() != schema)
    throw SchemaError(std::string("expected schema ") + schema + ", found " +
                      (j.contains("schema") ? j["schema"].dump() : std::string("none")));
}

}  // namespace

nlohmann::json to_json(const SelectionReport& report, const std::vector<std::string>& feature_names,
                       const std::vector<std::string>& group_names) {
  nlohmann::json j;
  j["schema"] = kSelectionSchema;
  j["alpha"] = report.alpha;
  j["seed"] = report.seed;
  j["calibration"] = to_string(report.calibration);
  j["tests_performed"] = report.tests_performed;
  j["selected"] = one_based(report.selected);
  nlohmann::json names = nlohmann::json::array();
  for (int f : report.selected) names.push_back(name_of(f, feature_names));
  j["selected_names"] = names;
  if (!group_names.empty()) {
    nlohmann::json groups = nlohmann::json::array();
    for (std::size_t g = 0; g < group_names.size(); ++g) groups.push_back({{"group", g + 1}, {"label", group_names[g]}});
    j["groups"] = groups;
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& n : report.trace) {
    nlohmann::json t;
    t["node"] = n.node;
    t["features"] = one_based(n.subset.indices());
    t["raw_p"] = n.raw_p;
    t["adjusted_p"] = n.adjusted_p;
    if (!std::isnan(n.statistic)) t["statistic"] = n.statistic;
    t["dof"] = n.dof;
    t["tested"] = n.tested;
    t["terminal"] = n.terminal;
    trace.push_back(std::move(t));
  }
  j["trace"] = trace;
  return j;
}

SelectionReport selection_from_json(const nlohmann::json& j) {
  expect_schema(j, kSelectionSchema);
  try {
    SelectionReport r;
    r.alpha = j.at("alpha").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.calibration = parse_calibration(j.at("calibration").get<std::string>());
    r.tests_performed = j.at("tests_performed").get<int>();
    for (int f : j.at("selected").get<std::vector<int>>()) r.selected.push_back(f - 1);
    for (const auto& t : j.at("trace")) {
      NodeResult n;
      n.node = t.at("node").get<int>();
      std::vector<int> feats;
      for (int f : t.at("features").get<std::vector<int>>()) feats.push_back(f - 1);
      n.subset = FeatureSubset(std::move(feats));
      n.raw_p = t.at("raw_p").get<double>();
      n.adjusted_p = t.at("adjusted_p").get<double>();
      if (t.contains("statistic")) n.statistic = t["statistic"].get<double>();
      n.dof = t.at("dof").get<int>();
      n.tested = t.at("tested").get<bool>();
      n.terminal = t.at("terminal").get<bool>();
      r.trace.push_back(std::move(n));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed selection report: ") + e.what());
  }
}

nlohmann::json to_json(const BootstrapReport& report, const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["schema"] = kBootstrapSchema;
  j["alpha"] = report.alpha;
  j["seed"] = report.seed;
  j["iterations"] = report.iterations;
  j["subsample_per_class"] = report.subsample_per_class;
  j["stable_set"] = one_based(report.stable_set);
  nlohmann::json names = nlohmann::json::array();
  for (int f : report.stable_set) names.push_back(name_of(f, feature_names));
  j["stable_names"] = names;
  nlohmann::json freq = nlohmann::json::array();
  for (std::size_t f = 0; f < report.frequency.size(); ++f)
    freq.push_back({{"feature", f + 1}, {"name", name_of(static_cast<int>(f), feature_names)},
                    {"count", report.frequency[f]}});
  j["frequency"] = freq;
  return j;
}

nlohmann::json to_json(const TestOutcome& outcome, const std::vector<std::string>& group_names) {
  nlohmann::json j;
  j["schema"] = kTestSchema;
  j["statistic"] = outcome.statistic;
  j["dof"] = outcome.dof;
  j["p_value"] = outcome.p_value;
  j["calibration"] = to_string(outcome.mode);
  j["permutations_used"] = outcome.permutations_used;
  j["matched_pairs"] = outcome.counts.pair_total;
  nlohmann::json counts = nlohmann::json::array();
  for (int a = 0; a < outcome.counts.k; ++a)
    for (int b = a + 1; b < outcome.counts.k; ++b)
      counts.push_back({{"groups", {a + 1, b + 1}}, {"count", outcome.counts.at(a, b)}});
  j["cross_counts"] = counts;
  if (!group_names.empty()) j["group_labels"] = group_names;
  j["dropped_row"] = outcome.dropped_row ? nlohmann::json(*outcome.dropped_row + 1) : nlohmann::json(nullptr);
  return j;
}

std::string selected_csv(const std::vector<int>& selected, const std::vector<std::string>& feature_names) {
  std::string out = "index,name\n";
  for (int f : selected) out += std::to_string(f + 1) + "," + name_of(f, feature_names) + "\n";
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw std::runtime_error("failed writing " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move " + tmp + " to " + path + ": " + ec.message());
  }
}

namespace {

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"schema_version", "design", "method", "d", "s", "k", "class_size",
                                             "theta", "phi", "rho", "t_dof", "alpha", "replicates", "fwer",
                                             "fdr", "power", "mean_recall", "mean_selected"};
  return cols;
}

}  // namespace

std::string metrics_csv_header(bool with_runtime) {
  std::string out;
  for (const auto& c : metrics_columns()) out += (out.empty() ? "" : ",") + c;
  if (with_runtime) out += ",runtime_s";
  return out + "\n";
}

std::string metrics_csv_rows(const PointResult& result, const SimulationSettings& settings, bool with_runtime) {
  std::ostringstream os;
  os << std::setprecision(12);
  auto row = [&](const char* method, const MetricEstimates& m) {
    const auto& p = result.point;
    os << kMetricsSchemaVersion << ',' << to_string(p.design) << ',' << method << ',' << p.d << ','
       << (p.design == Design::cross_family ? (p.d + 3) / 4 : p.s) << ',' << (p.design == Design::cross_family ? 3 : p.k)
       << ',' << p.class_size << ',' << p.theta << ',' << p.phi << ',' << p.rho << ',' << p.t_dof << ','
       << settings.alpha << ',' << m.replicates << ',' << m.fwer << ',' << m.fdr << ',' << m.power << ','
       << m.mean_recall << ',' << m.mean_selected;
    if (with_runtime) os << ',' << result.runtime_seconds;
    os << '\n';
  };
  if (result.gfs) row("gfs", *result.gfs);
  if (result.kw) row("kw-bonferroni", *result.kw);
  return os.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("metrics CSV is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  const auto header = split(line);
  const auto& cols = metrics_columns();
  const bool timing = header.size() == cols.size() + 1 && header.back() == "runtime_s";
  if (!(header.size() == cols.size() || timing) || !std::equal(cols.begin(), cols.end(), header.begin()))
    throw SchemaError("metrics CSV header does not match schema version " + std::to_string(kMetricsSchemaVersion));
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw SchemaError("metrics CSV row has " + std::to_string(f.size()) + " fields");
    MetricsRow r;
    try {
      r.schema_version = std::stoi(f[0]);
      if (r.schema_version != kMetricsSchemaVersion)
        throw SchemaError("metrics CSV schema version " + f[0] + " is not supported");
      r.design = f[1];
      r.method = f[2];
      r.point.design = parse_design(f[1]);
      r.point.d = std::stoi(f[3]);
      r.point.s = std::stoi(f[4]);
      r.point.k = std::stoi(f[5]);
      r.point.class_size = std::stoi(f[6]);
      r.point.theta = std::stod(f[7]);
      r.point.phi = std::stod(f[8]);
      r.point.rho = std::stod(f[9]);
      r.point.t_dof = std::stod(f[10]);
      r.alpha = std::stod(f[11]);
      r.replicates = std::stoi(f[12]);
      r.fwer = std::stod(f[13]);
      r.fdr = std::stod(f[14]);
      r.power = std::stod(f[15]);
      r.mean_recall = std::stod(f[16]);
      r.mean_selected = std::stod(f[17]);
      if (timing) r.runtime_seconds = std::stod(f[18]);
    } catch (const std::logic_error& e) {
      throw SchemaError(std::string("metrics CSV field does not parse: ") + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace gfs
