#ifndef BPRE_LINALG_HPP
#define BPRE_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bpre/errors.hpp"

namespace bpre {

using Vec = std::vector<double>;

// Dense square matrix, row-major. Dimensions stay tiny (p <= 3 in practice),
// so everything is plain loops.
struct Mat {
    int n = 0;
    std::vector<double> a;

    Mat() = default;
    explicit Mat(int dim) : n(dim), a(static_cast<size_t>(dim) * dim, 0.0) {}

    static Mat identity(int dim) {
        Mat m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
};

inline Mat mat_mul(const Mat& x, const Mat& y) {
    Mat out(x.n);
    for (int i = 0; i < x.n; ++i)
        for (int k = 0; k < x.n; ++k) {
            const double xv = x(i, k);
            if (xv == 0.0) continue;
            for (int j = 0; j < x.n; ++j) out(i, j) += xv * y(k, j);
        }
    return out;
}

inline Vec mat_vec(const Mat& m, const Vec& x) {
    Vec out(static_cast<size_t>(m.n), 0.0);
    for (int i = 0; i < m.n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.n; ++j) s += m(i, j) * x[j];
        out[i] = s;
    }
    return out;
}

inline Vec vec_mat(const Vec& x, const Mat& m) {
    Vec out(static_cast<size_t>(m.n), 0.0);
    for (int j = 0; j < m.n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m.n; ++i) s += x[i] * m(i, j);
        out[j] = s;
    }
    return out;
}

inline double l1_norm(const Vec& x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

// Entrywise L1 norm of a matrix (the paper-style |m| for matrices).
inline double l1_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += std::abs(v);
    return s;
}

// Operator norm for column action on L1: maximum column sum of |entries|.
inline double op_norm(const Mat& m) {
    double best = 0.0;
    for (int j = 0; j < m.n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m.n; ++i) s += std::abs(m(i, j));
        if (s > best) best = s;
    }
    return best;
}

inline double min_entry(const Mat& m) {
    double v = std::numeric_limits<double>::infinity();
    for (double x : m.a) v = std::min(v, x);
    return v;
}

inline double max_entry(const Mat& m) {
    double v = -std::numeric_limits<double>::infinity();
    for (double x : m.a) v = std::max(v, x);
    return v;
}

// max entry / min entry; +inf when the matrix has a zero (or negative) entry.
inline double entry_ratio(const Mat& m) {
    const double lo = min_entry(m);
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return max_entry(m) / lo;
}

// L1 projection onto the simplex of directions: v / |v|.
inline Vec project_direction(const Vec& v) {
    const double s = l1_norm(v);
    if (s <= 0.0) throw DegenerateInputError("cannot project zero vector onto the simplex");
    Vec out(v);
    for (double& x : out) x /= s;
    return out;
}

inline Vec one_minus(const Vec& s) {
    Vec out(s.size());
    for (size_t i = 0; i < s.size(); ++i) out[i] = 1.0 - s[i];
    return out;
}

inline Vec basis_vector(int p, int i) {
    Vec e(static_cast<size_t>(p), 0.0);
    e[static_cast<size_t>(i)] = 1.0;
    return e;
}

// Kahan-compensated accumulator.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

}  // namespace bpre

#endif
