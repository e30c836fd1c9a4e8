#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "hype/crc32c.hpp"
#include "hype/histogram.hpp"
#include "hype/rng.hpp"

using namespace hype;

TEST_CASE("crc32c known answer") {
    // standard check value for the Castagnoli polynomial
    const char* msg = "123456789";
    CHECK(crc32c(msg, 9) == 0xE3069283u);
    CHECK(crc32c(nullptr, 0) == 0x00000000u);
}

TEST_CASE("histogram of a constant stream puts everything in one bin") {
    std::vector<double> values(50, 3.25);
    HistogramSpec spec;
    spec.bin_count = 10;
    auto bins = export_histogram(values, spec);
    REQUIRE(bins.size() == 10);
    double total = 0.0;
    int full_bins = 0;
    for (const auto& bin : bins) {
        total += bin.percent;
        if (bin.percent > 0.0) {
            ++full_bins;
            CHECK(bin.percent == doctest::Approx(100.0).epsilon(1e-12));
        }
    }
    CHECK(full_bins == 1);
    CHECK(total == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("histogram percentages sum to 100") {
    Rng rng(77);
    std::vector<double> values(1234);
    for (double& v : values) v = rng.normal();
    HistogramSpec spec;
    spec.bin_count = 37;
    auto bins = export_histogram(values, spec);
    double total = 0.0;
    for (const auto& bin : bins) total += bin.percent;
    CHECK(std::fabs(total - 100.0) <= 1e-6);
}

TEST_CASE("uniform stream spreads to about a quarter per bin") {
    Rng rng(78);
    std::vector<double> values(4000);
    for (double& v : values) v = rng.uniform();
    HistogramSpec spec;
    spec.bin_count = 4;
    spec.range_min = 0.0;
    spec.range_max = 1.0;
    auto bins = export_histogram(values, spec);
    // binomial: sigma of a bin percentage ~ sqrt(p(1-p)/n)*100 ~ 0.68
    for (const auto& bin : bins) CHECK(std::fabs(bin.percent - 25.0) <= 3.0 * 0.69);
}

TEST_CASE("max-edge values land in the last bin") {
    // 0.5 sits on the boundary and belongs to the upper half-open bin; the
    // two 1.0 values must be counted rather than falling off the top edge.
    std::vector<double> values{0.0, 0.5, 1.0, 1.0};
    HistogramSpec spec;
    spec.bin_count = 2;
    spec.range_min = 0.0;
    spec.range_max = 1.0;
    auto bins = export_histogram(values, spec);
    CHECK(bins[0].percent == doctest::Approx(25.0));
    CHECK(bins[1].percent == doctest::Approx(75.0));
}

TEST_CASE("histogram validation") {
    HistogramSpec spec;
    CHECK_THROWS_AS((void)export_histogram(std::vector<double>{}, spec), std::invalid_argument);
    spec.range_min = 2.0;
    spec.range_max = 1.0;
    std::vector<double> values{0.5};
    CHECK_THROWS_AS((void)export_histogram(values, spec), std::invalid_argument);
}

TEST_CASE("histogram csv layout") {
    std::vector<double> values{0.0, 1.0};
    HistogramSpec spec;
    spec.bin_count = 2;
    auto bins = export_histogram(values, spec);
    std::ostringstream out;
    write_histogram_csv(bins, out);
    CHECK(out.str().rfind("bin_lo,bin_hi,percent\n", 0) == 0);
    CHECK(out.str().find("50") != std::string::npos);
}
