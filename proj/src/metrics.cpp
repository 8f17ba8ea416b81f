#include "madpot/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "madpot/errors.hpp"
#include "madpot/rng.hpp"

#include "json.hpp"

namespace madpot {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("roc_auc: size mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += (l != 0) ? 1u : 0u;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw InvalidInputError("roc_auc: both classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie runs; 1-based ranks.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) pos_rank_sum += midrank;
        i = j + 1;
    }
    const double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double pixel_auc(std::span<const Matrix> maps, std::span<const Matrix> masks, std::uint64_t seed) {
    if (maps.size() != masks.size()) throw ShapeError("pixel_auc: image count mismatch");
    if (maps.empty()) throw InvalidInputError("pixel_auc: no images");
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (!maps[i].same_shape(masks[i])) throw ShapeError("pixel_auc: map/mask shape mismatch");
        for (std::size_t k = 0; k < maps[i].size(); ++k) {
            scores.push_back(maps[i].data[k]);
            labels.push_back(masks[i].data[k] > 0.5 ? 1 : 0);
        }
    }
    constexpr std::size_t kMaxPixels = 1000000;
    if (scores.size() > kMaxPixels) {
        SplitMix64 rng(seed);
        // Partial Fisher-Yates: the first kMaxPixels entries become a uniform
        // sample without replacement.
        std::vector<std::size_t> idx(scores.size());
        std::iota(idx.begin(), idx.end(), 0u);
        for (std::size_t i2 = 0; i2 < kMaxPixels; ++i2) {
            const std::size_t j =
                i2 + static_cast<std::size_t>(rng.next() % (idx.size() - i2));
            std::swap(idx[i2], idx[j]);
        }
        std::vector<double> s2(kMaxPixels);
        std::vector<int> l2(kMaxPixels);
        for (std::size_t i2 = 0; i2 < kMaxPixels; ++i2) {
            s2[i2] = scores[idx[i2]];
            l2[i2] = labels[idx[i2]];
        }
        scores = std::move(s2);
        labels = std::move(l2);
    }
    return roc_auc(scores, labels);
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "madpot-report";
    j["version"] = 1;
    j["n_images"] = report.n_images;
    j["variant"] = report.variant;
    j["vision"] = report.vision;
    j["ac_auc"] = report.ac_auc;
    if (report.as_auc) j["as_auc"] = *report.as_auc;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : report.config_echo) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json imgs = nlohmann::ordered_json::array();
    for (const PerImageScore& s : report.per_image) {
        nlohmann::ordered_json e;
        e["image"] = s.image;
        e["label"] = s.label;
        e["score"] = s.score;
        imgs.push_back(e);
    }
    j["per_image"] = imgs;
    return j.dump(2) + "\n";
}

}  // namespace madpot
