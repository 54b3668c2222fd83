#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <vector>

namespace crx {

// Quantile with linear interpolation between closest order statistics
// (h = (n-1)p). Input must be sorted ascending.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    const size_t n = sorted.size();
    if (n == 0) return std::nan("");
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

inline double iqr_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

// Population skewness m3 / m2^1.5; 0 when the variance vanishes.
inline double skewness_population(std::span<const double> x) {
    const size_t n = x.size();
    if (n == 0) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    if (m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

// Population excess kurtosis m4 / m2^2 - 3; 0 when the variance vanishes.
inline double kurtosis_excess_population(std::span<const double> x) {
    const size_t n = x.size();
    if (n == 0) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 <= 0.0) return 0.0;
    return m4 / (m2 * m2) - 3.0;
}

inline double std_population(std::span<const double> x) {
    const size_t n = x.size();
    if (n == 0) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) {
        const double d = v - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n));
}

// Sliding-window median over a fixed window of `width` trailing samples.
// out[i] is the median of x[i-width+1 .. i] and is produced for
// i >= width-1 (earlier entries are NaN). Two balanced multisets,
// O(n log width).
inline std::vector<double> sliding_median(std::span<const double> x, size_t width) {
    const size_t n = x.size();
    std::vector<double> out(n, std::nan(""));
    if (width == 0 || n < width) return out;

    std::multiset<double> low, high;  // max-half, min-half; |low| == |high| or |low|+1
    auto rebalance = [&] {
        while (low.size() > high.size() + 1) {
            auto it = std::prev(low.end());
            high.insert(*it);
            low.erase(it);
        }
        while (high.size() > low.size()) {
            auto it = high.begin();
            low.insert(*it);
            high.erase(it);
        }
    };
    auto insert_value = [&](double v) {
        if (low.empty() || v <= *std::prev(low.end()))
            low.insert(v);
        else
            high.insert(v);
        rebalance();
    };
    auto erase_value = [&](double v) {
        if (auto it = low.find(v); it != low.end())
            low.erase(it);
        else
            high.erase(high.find(v));
        rebalance();
    };
    auto current_median = [&]() -> double {
        if (low.size() > high.size()) return *std::prev(low.end());
        return 0.5 * (*std::prev(low.end()) + *high.begin());
    };

    for (size_t i = 0; i < n; ++i) {
        insert_value(x[i]);
        if (i >= width) erase_value(x[i - width]);
        if (i + 1 >= width) out[i] = current_median();
    }
    return out;
}

// Trailing-window mean of squares via prefix sums. out[i] covers
// x[i-width+1 .. i]; entries with an incomplete window are NaN.
inline std::vector<double> trailing_mean_square(std::span<const double> x, size_t width) {
    const size_t n = x.size();
    std::vector<double> out(n, std::nan(""));
    if (width == 0 || n < width) return out;
    std::vector<double> prefix(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
    for (size_t i = width - 1; i < n; ++i)
        out[i] = (prefix[i + 1] - prefix[i + 1 - width]) / static_cast<double>(width);
    return out;
}

// Trailing root-mean-square over `width` samples.
inline std::vector<double> trailing_rms(std::span<const double> x, size_t width) {
    auto out = trailing_mean_square(x, width);
    for (double& v : out)
        if (!std::isnan(v)) v = std::sqrt(std::max(0.0, v));
    return out;
}

}  // namespace crx
