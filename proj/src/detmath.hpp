#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace deltagas::detail {

// determinant of a row-major m x m complex matrix by partially pivoted LU;
// the matrix is destroyed in place
inline std::complex<double> complex_det(std::complex<double>* a, int m) {
    std::complex<double> det = 1.0;
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(a[r * m + col]) > std::abs(a[piv * m + col])) piv = r;
        if (piv != col) {
            for (int cc = 0; cc < m; ++cc) std::swap(a[col * m + cc], a[piv * m + cc]);
            det = -det;
        }
        const std::complex<double> p = a[col * m + col];
        if (p == std::complex<double>(0.0, 0.0)) return 0.0;
        det *= p;
        for (int r = col + 1; r < m; ++r) {
            const std::complex<double> fac = a[r * m + col] / p;
            for (int cc = col; cc < m; ++cc) a[r * m + cc] -= fac * a[col * m + cc];
        }
    }
    return det;
}

inline std::complex<double> complex_det(std::vector<std::complex<double>> a, int m) {
    return complex_det(a.data(), m);
}

} // namespace deltagas::detail
