#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace bochner::verify {

/// Outcome of one named check on one manifold. `values` preserves insertion
/// order so serialized reports are stable.
struct CheckResult {
    std::string check;
    std::string manifold;
    std::vector<std::pair<std::string, double>> values;
    double tolerance = 0.0;
    bool pass = false;
    /// Preconditions not met: reported, but neither pass nor fail.
    bool applicable = true;
    std::string note;
    int resolution = 0;
    std::uint64_t seed = 0;
    double millis = 0.0;

    void value(const std::string& name, double v) { values.emplace_back(name, v); }
    double get(const std::string& name) const;
    bool ok() const { return !applicable || pass; }
};

struct Report {
    std::string suite_version = "1.0";
    std::uint64_t seed = 0;
    std::string profile = "default";
    int threads = 1;
    std::vector<CheckResult> results;

    bool verdict() const;

    /// Deterministic JSON (insertion-ordered keys, shortest round-trip
    /// doubles). Wall-clock times are emitted only when `timings` is set,
    /// keeping default output byte-reproducible for a fixed seed.
    std::string to_json(bool timings = false) const;
};

std::string check_result_json(const CheckResult& r, bool timings = false);

}  // namespace bochner::verify
