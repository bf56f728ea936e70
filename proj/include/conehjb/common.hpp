// Shared aliases, error types and small utilities used across the toolkit.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace conehjb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PropernessViolation : Error { using Error::Error; };
struct OutsideCone : Error { using Error::Error; };
struct UnsupportedDimension : Error { using Error::Error; };
struct SupportViolation : Error { using Error::Error; };
struct NegativeIntensity : Error { using Error::Error; };
struct NonpositivePrice : Error { using Error::Error; };
struct GrowthViolation : Error { using Error::Error; };
struct DualMembership : Error { using Error::Error; };
struct NoScaleFound : Error { using Error::Error; };
struct NotConverged : Error { using Error::Error; };
struct MonotonicityBreach : Error { using Error::Error; };
struct PolicyViolation : Error { using Error::Error; };
struct Unsupported : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

inline Vec make_vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Runs fn(i) for i in [0, n). With threads > 1 the range is chunked; results
// must not depend on execution order (callers own any reduction ordering).
// The first worker exception is rethrown after all threads join.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 1) {
    if (threads <= 1 || n < 2 * threads) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr error;
    std::mutex error_mutex;
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &error, &error_mutex] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// Mean and sample standard deviation in fixed index order, so results are
// identical regardless of how the values were produced.
struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    r.n = xs.size();
    if (r.n == 0) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(r.n);
    if (r.n > 1) {
        double q = 0.0;
        for (double x : xs) {
            double d = x - r.mean;
            q += d * d;
        }
        r.stddev = std::sqrt(q / static_cast<double>(r.n - 1));
    }
    return r;
}

}  // namespace conehjb
