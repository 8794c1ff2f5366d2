#include "poseret/harness.hpp"

#include <algorithm>
#include <cmath>

#include "poseret/error.hpp"

namespace poseret {

namespace {

double median_inplace(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

double med_err(std::vector<double> errors) {
    if (errors.empty()) fail(ErrorCategory::EmptyInput, "median of an empty error list");
    return median_inplace(errors);
}

double acc_pi6(const std::vector<double>& errors) {
    if (errors.empty()) fail(ErrorCategory::EmptyInput, "accuracy of an empty error list");
    std::size_t hit = 0;
    for (double e : errors)
        if (e < kPi / 6.0) ++hit;
    return static_cast<double>(hit) / static_cast<double>(errors.size());
}

double top1_acc(const std::vector<std::pair<std::string, std::string>>& retrieved_vs_gt) {
    if (retrieved_vs_gt.empty()) fail(ErrorCategory::EmptyInput, "top-1 accuracy of an empty list");
    std::size_t hit = 0;
    for (const auto& [got, want] : retrieved_vs_gt)
        if (got == want) ++hit;
    return static_cast<double>(hit) / static_cast<double>(retrieved_vs_gt.size());
}

std::array<double, 3> dim_mae(const std::vector<std::array<double, 3>>& pred,
                              const std::vector<std::array<double, 3>>& gt) {
    if (pred.empty()) fail(ErrorCategory::EmptyInput, "dimension error of an empty list");
    if (pred.size() != gt.size()) fail(ErrorCategory::Shape, "dimension list length mismatch");
    std::array<double, 3> out{};
    for (int a = 0; a < 3; ++a) {
        std::vector<double> abs_err(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) abs_err[i] = std::abs(pred[i][a] - gt[i][a]);
        out[a] = median_inplace(abs_err);
    }
    return out;
}

} // namespace poseret
