#pragma once

#include <string>
#include <vector>

#include "lnared/analysis.hpp"
#include "lnared/ensemble.hpp"
#include "lnared/moments.hpp"

namespace lnared {

// Scientific notation with 17 significant digits: enough to round-trip any
// double bit-exactly, locale-independent by construction.
std::string format_double(double v);
double parse_double(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Header line plus one line per row, comma-separated, trailing newline.
void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

// Column layouts for the artifact files. Moment entries are named m[i] and
// M[i][j] (upper triangle), ensemble standard errors se_m[i] / se_M[i][j].
CsvTable table_from_original(const OriginalMomentTrajectory& traj,
                             const std::vector<std::string>& x_names,
                             const std::vector<std::string>& z_names);
CsvTable table_from_reduced(const ReducedMomentTrajectory& traj,
                            const std::vector<std::string>& x_names);
CsvTable table_from_stats(const EnsembleStats& stats);
CsvTable table_from_sweep(const SweepResult& sweep);

} // namespace lnared
