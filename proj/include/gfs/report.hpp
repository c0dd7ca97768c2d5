#pragma once

#include "gfs/crossmatch.hpp"
#include "gfs/evaluation.hpp"
#include "gfs/selection.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace gfs {

inline constexpr const char* kSelectionSchema = "gfs.selection/1";
inline constexpr const char* kBootstrapSchema = "gfs.bootstrap/1";
inline constexpr const char* kTestSchema = "gfs.test/1";
inline constexpr int kMetricsSchemaVersion = 1;

/// Thrown when a file written by this tool carries an unexpected schema.
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

/// Feature indices are written 1-based, alongside their names.
nlohmann::json to_json(const SelectionReport& report, const std::vector<std::string>& feature_names,
                       const std::vector<std::string>& group_names = {});
SelectionReport selection_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BootstrapReport& report, const std::vector<std::string>& feature_names);
nlohmann::json to_json(const TestOutcome& outcome, const std::vector<std::string>& group_names = {});

/// "index,name" rows of the selected features.
std::string selected_csv(const std::vector<int>& selected, const std::vector<std::string>& feature_names);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

struct MetricsRow {
  int schema_version = kMetricsSchemaVersion;
  std::string design;
  std::string method;
  DesignPoint point;
  double alpha = 0.05;
  int replicates = 0;
  double fwer = 0, fdr = 0, power = 0, mean_recall = 0, mean_selected = 0;
  double runtime_seconds = -1;  // only present when timing is requested
};

std::string metrics_csv_header(bool with_runtime);
/// One row per method present in `result`.
std::string metrics_csv_rows(const PointResult& result, const SimulationSettings& settings, bool with_runtime);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

}  // namespace gfs
