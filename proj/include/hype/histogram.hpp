#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hype {

struct HistogramSpec {
    std::string metric;
    std::size_t bin_count = 100;
    // Absent range = observed min/max.
    std::optional<double> range_min;
    std::optional<double> range_max;
};

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    double percent = 0.0;  // 100 * count / total
};

// Uniform bins over the range; values at the max edge land in the last bin.
std::vector<HistogramBin> export_histogram(std::span<const double> values,
                                           const HistogramSpec& spec);

// CSV `bin_lo,bin_hi,percent`.
void write_histogram_csv(std::span<const HistogramBin> bins, std::ostream& out);

}  // namespace hype
