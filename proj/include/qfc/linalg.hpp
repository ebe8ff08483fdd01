#pragma once

#include <cmath>
#include <vector>

#include "qfc/errors.hpp"

namespace qfc {

// Dense symmetric positive definite solve via Cholesky. A is row-major n*n,
// overwritten. Throws NumericError if a pivot is not strictly positive.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                                     const char* context) {
    const size_t n = b.size();
    for (size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0) || !std::isfinite(d))
            throw NumericError(std::string(context) + ": matrix not positive definite");
        const double lj = std::sqrt(d);
        a[j * n + j] = lj;
        for (size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / lj;
        }
    }
    // forward then back substitution
    for (size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
        b[ii] = s / a[ii * n + ii];
    }
    return b;
}

}  // namespace qfc
