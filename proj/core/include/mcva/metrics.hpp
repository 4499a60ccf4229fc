#pragma once

#include <cstdint>
#include <vector>

namespace mcva {

struct FlowMetrics {
    double aepe = 0.0;   // mean Euclidean error, image pixels
    double f1_all = 0.0; // percent outliers
    std::int64_t pixels = 0;
};

// Outlier rule: error > 3 px or (default) / and > 5% of the ground-truth
// vector length.
bool flow_outlier(double err, double gt_len, bool or_rule);

// Accumulating metric over (u, v) pairs in image-pixel units.
class FlowMetricsAccum {
public:
    explicit FlowMetricsAccum(bool or_rule = true) : or_rule_(or_rule) {}
    void add(double pred_u, double pred_v, double gt_u, double gt_v);
    FlowMetrics result() const;

private:
    bool or_rule_;
    double err_sum_ = 0.0;
    std::int64_t outliers_ = 0;
    std::int64_t pixels_ = 0;
};

} // namespace mcva
