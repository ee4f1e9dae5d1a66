#include "gle/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace gle {

double determinant_lu(Mat m) {
    assert(m.rows() == m.cols());
    const int n = m.rows();
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int i = col + 1; i < n; ++i)
            if (std::abs(m(i, col)) > std::abs(m(piv, col))) piv = i;
        if (m(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
            det = -det;
        }
        det *= m(col, col);
        for (int i = col + 1; i < n; ++i) {
            const double f = m(i, col) / m(col, col);
            for (int j = col + 1; j < n; ++j) m(i, j) -= f * m(col, j);
        }
    }
    return det;
}

std::vector<double> solve_lu(Mat a, std::vector<double> b) {
    assert(a.rows() == a.cols() && a.rows() == static_cast<int>(b.size()));
    const int n = a.rows();
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        if (a(piv, col) == 0.0) throw std::runtime_error("solve_lu: singular matrix");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            std::swap(b[piv], b[col]);
        }
        for (int i = col + 1; i < n; ++i) {
            const double f = a(i, col) / a(col, col);
            b[i] -= f * b[col];
            for (int j = col + 1; j < n; ++j) a(i, j) -= f * a(col, j);
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a(i, j) * b[j];
        b[i] = s / a(i, i);
    }
    return b;
}

std::vector<double> symmetric_eigenvalues(Mat m, double sym_tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("eigenvalues: matrix not square");
    const double scale = std::max(max_abs(m), 1e-300);
    if (max_abs_sym_defect(m) > sym_tol * scale)
        throw std::invalid_argument("eigenvalues: matrix not symmetric");
    const int n = m.rows();
    // Cyclic Jacobi sweeps; plenty at these dimensions.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
        if (off < 1e-30 * scale * scale) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = m(i, p), aiq = m(i, q);
                    m(i, p) = c * aip - s * aiq;
                    m(i, q) = s * aip + c * aiq;
                }
                for (int j = 0; j < n; ++j) {
                    const double apj = m(p, j), aqj = m(q, j);
                    m(p, j) = c * apj - s * aqj;
                    m(q, j) = s * apj + c * aqj;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = m(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

double min_eigenvalue(const Mat& m, double sym_tol) {
    return symmetric_eigenvalues(m, sym_tol).front();
}

}  // namespace gle
