#pragma once

#include <string>
#include <vector>

#include "oodcal/config.hpp"
#include "oodcal/pipeline.hpp"

namespace oodcal::report {

// Fixed 6-decimal formatting used in every CSV cell.
std::string fixed(double v);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(const std::vector<double>& v);

// Writes table1.csv, ablation_components.csv, ablation_na.csv, per_slice.csv,
// reliability.csv, histogram.csv and figures/ under <run>/report. Throws with
// the list of missing evaluation artifacts if any are absent. Returns the
// written paths relative to the run root.
std::vector<std::string> write_report(const harness::ExperimentConfig& config, const harness::RunLayout& layout);

}  // namespace oodcal::report
