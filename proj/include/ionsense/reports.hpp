#pragma once

#include <string>

#include "ionsense/force_pipeline.hpp"
#include "ionsense/quantum_limits.hpp"

namespace ionsense {

/// JSON renderings of analysis products, used by the CLI and the bindings.
std::string analysis_report_to_json(const AnalysisReport& report);
std::string limit_report_to_json(const LimitReport& report);

/// Human-readable force table for terminal output.
std::string format_analysis_report(const AnalysisReport& report);

} // namespace ionsense
