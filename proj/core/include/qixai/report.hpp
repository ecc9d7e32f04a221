// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "qixai/pipeline.hpp"

namespace qixai {

inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kArtifactsFile = "artifacts.qixt";
inline constexpr const char* kHeatmapDir = "heatmaps";

/// The report document: JSON with a fixed key order (schema in docs/report.md).
std::string report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(std::string_view document, TensorArchive artifacts);

/// Writes report.json, artifacts.qixt, spectrum.csv and heatmaps/*.png into
/// dir. On failure every file this call created is removed again.
void write_report(const AnalysisReport& report, const std::filesystem::path& dir);
AnalysisReport read_report(const std::filesystem::path& dir);

struct AuditResult {
  std::size_t checked = 0;
  std::vector<std::string> mismatches;
  bool ok() const noexcept { return mismatches.empty(); }
};

/// Recomputes every report scalar from the artifact archive with the module
/// operations and compares bit-for-bit. The model is reloaded from the config
/// paths (when readable) to recheck the attribution endpoint values.
AuditResult audit_report(const AnalysisReport& report);

}  // namespace qixai
