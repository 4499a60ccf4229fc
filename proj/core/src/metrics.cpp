#include "mcva/metrics.hpp"

#include <cmath>

namespace mcva {

bool flow_outlier(double err, double gt_len, bool or_rule) {
    const bool abs_bad = err > 3.0;
    const bool rel_bad = err > 0.05 * gt_len;
    return or_rule ? (abs_bad || rel_bad) : (abs_bad && rel_bad);
}

void FlowMetricsAccum::add(double pred_u, double pred_v, double gt_u, double gt_v) {
    const double err = std::hypot(pred_u - gt_u, pred_v - gt_v);
    err_sum_ += err;
    if (flow_outlier(err, std::hypot(gt_u, gt_v), or_rule_)) ++outliers_;
    ++pixels_;
}

FlowMetrics FlowMetricsAccum::result() const {
    FlowMetrics m;
    m.pixels = pixels_;
    if (pixels_ > 0) {
        m.aepe = err_sum_ / static_cast<double>(pixels_);
        m.f1_all = 100.0 * static_cast<double>(outliers_) / static_cast<double>(pixels_);
    }
    return m;
}

} // namespace mcva
