#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "nnpanel/panel.hpp"

namespace nnpanel {

/// Long-format CSV with header `unit,time,y,x1,...,xK`. Units and times are
/// sorted (numerically when every label parses as a number, otherwise
/// lexicographically) and must form a complete balanced grid.
///
/// Errors: Error(parse) with the 1-based line number for malformed rows,
/// Error(unbalanced_panel) naming a duplicate or the first missing
/// (unit, time) pair.
PanelData read_panel_csv(std::istream& in);
PanelData ingest_panel(const std::string& path);

/// Writes the same format with values printed to 17 significant digits, so
/// ingest_panel reproduces the matrices bit for bit.
void write_panel_csv(std::ostream& out, const PanelData& data);
void write_panel(const std::string& path, const PanelData& data);

}  // namespace nnpanel
