#pragma once

#include <string>
#include <vector>

#include "ionsense/run_config.hpp"

namespace ionsense {

/// One line of a reproduction table: a computed quantity next to the
/// reference value it should land on. `reference` may be NaN for purely
/// informational rows; `deviation_percent` is 100 * (computed/reference - 1).
struct ReproRow {
    std::string quantity;
    std::string units;
    double computed = 0;
    double reference = 0;
    double deviation_percent = 0;
    std::string note;
};

struct ReproTable {
    std::string case_name;
    std::vector<ReproRow> rows;
};

/// Names of the available reproduction cases.
std::vector<std::string> reproduction_case_names();

/// Recomputes one published result chain from the configuration and pairs
/// every quantity with its reference value. Unknown case names throw
/// InvalidInput listing the available cases.
ReproTable run_reproduction(const std::string& case_name, const RunConfig& config);

std::string format_repro_table(const ReproTable& table);
std::string repro_table_to_json(const ReproTable& table);

} // namespace ionsense
