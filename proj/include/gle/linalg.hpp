#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gle {

// Small dense row-major matrix. Every matrix in this project has at most
// k + 2 rows, so nothing here is tuned beyond that scale.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    const double* data() const { return a_.data(); }
    double* data() { return a_.data(); }

    Mat transposed() const {
        Mat t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

inline Mat operator*(const Mat& a, const Mat& b) {
    assert(a.cols() == b.rows());
    Mat c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int l = 0; l < a.cols(); ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += ail * b(l, j);
        }
    return c;
}

inline Mat operator+(const Mat& a, const Mat& b) {
    assert(a.rows() == b.rows() && a.cols() == b.cols());
    Mat c = a;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
    return c;
}

inline Mat operator-(const Mat& a, const Mat& b) {
    assert(a.rows() == b.rows() && a.cols() == b.cols());
    Mat c = a;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
    return c;
}

inline double max_abs(const Mat& m) {
    double r = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) r = std::max(r, std::abs(m(i, j)));
    return r;
}

inline double max_abs_sym_defect(const Mat& m) {
    double r = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) r = std::max(r, std::abs(m(i, j) - m(j, i)));
    return r;
}

// Determinant by LU with partial pivoting. Used as the numeric route next to
// the closed-form determinant of the implicit-system Jacobian.
double determinant_lu(Mat m);

// Solve a x = b in place (dense LU, partial pivoting). Throws on singular a.
std::vector<double> solve_lu(Mat a, std::vector<double> b);

// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
// Rejects inputs whose symmetry defect exceeds sym_tol relative to max |m|.
double min_eigenvalue(const Mat& m, double sym_tol = 1e-10);

// All eigenvalues, same algorithm, ascending.
std::vector<double> symmetric_eigenvalues(Mat m, double sym_tol = 1e-10);

}  // namespace gle
