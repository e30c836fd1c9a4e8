#include "hype/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace hype {

std::vector<HistogramBin> export_histogram(std::span<const double> values,
                                           const HistogramSpec& spec) {
    if (spec.bin_count < 1) throw std::invalid_argument("export_histogram: bin_count must be >= 1");

    double lo, hi;
    if (spec.range_min && spec.range_max) {
        lo = *spec.range_min;
        hi = *spec.range_max;
    } else {
        if (values.empty())
            throw std::invalid_argument("export_histogram: auto range needs a nonempty stream");
        lo = *std::min_element(values.begin(), values.end());
        hi = *std::max_element(values.begin(), values.end());
        if (lo == hi) hi = lo + 1.0;  // constant stream still gets a usable range
    }
    if (!(lo < hi)) throw std::invalid_argument("export_histogram: range min must be < max");

    std::vector<std::size_t> counts(spec.bin_count, 0);
    std::size_t total = 0;
    double width = (hi - lo) / static_cast<double>(spec.bin_count);
    for (double v : values) {
        if (v < lo || v > hi) continue;  // explicit ranges may exclude values
        auto bin = static_cast<std::size_t>((v - lo) / width);
        if (bin >= spec.bin_count) bin = spec.bin_count - 1;  // v == hi
        ++counts[bin];
        ++total;
    }
    if (total == 0) throw std::invalid_argument("export_histogram: no values fall in the range");

    std::vector<HistogramBin> bins(spec.bin_count);
    for (std::size_t i = 0; i < spec.bin_count; ++i) {
        bins[i].lo = lo + width * static_cast<double>(i);
        bins[i].hi = i + 1 == spec.bin_count ? hi : lo + width * static_cast<double>(i + 1);
        bins[i].percent = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return bins;
}

void write_histogram_csv(std::span<const HistogramBin> bins, std::ostream& out) {
    out << "bin_lo,bin_hi,percent\n";
    char buf[128];
    for (const HistogramBin& bin : bins) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", bin.lo, bin.hi, bin.percent);
        out << buf;
    }
}

}  // namespace hype
