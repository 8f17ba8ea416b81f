#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "madpot/matrix.hpp"

namespace madpot {

// Mann-Whitney AUC via rank sums with midrank tie correction, O(n log n).
// labels: 1 = positive. Requires both classes present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Pools all pixels of mask-bearing images; beyond 1e6 pixels a seeded uniform
// subsample keeps the computation bounded.
double pixel_auc(std::span<const Matrix> maps, std::span<const Matrix> masks, std::uint64_t seed);

struct PerImageScore {
    std::string image;
    int label = 1;  // manifest convention: 1 normal, 0 abnormal
    double score = 0.0;
};

struct EvalReport {
    double ac_auc = 0.0;
    std::optional<double> as_auc;  // absent iff the eval set has no masks
    int n_images = 0;
    std::string variant;
    std::string vision;
    std::vector<std::pair<std::string, std::string>> config_echo;  // key, value
    std::vector<PerImageScore> per_image;
};

// Single JSON document with stable key order (no timestamps).
std::string report_to_json(const EvalReport& report);

}  // namespace madpot
