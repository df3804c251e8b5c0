#include "navprune/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace navprune {

namespace {

void accumulate_row(const Matrix& a, const Matrix& b, std::size_t r, Matrix& out) {
    auto dst = out.row(r);
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double x = a(r, k);
        auto src = b.row(k);
        for (std::size_t c = 0; c < b.cols(); ++c) dst[c] += x * src[c];
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b, MacCounter* counter) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) accumulate_row(a, b, r, out);
    if (counter) counter->add(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
    return out;
}

Matrix matmul_rows(const Matrix& a, const Matrix& b, std::span<const std::size_t> rows,
                   MacCounter* counter) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t r : rows) {
        if (r >= a.rows()) throw std::out_of_range("matmul_rows: row index");
        accumulate_row(a, b, r, out);
    }
    if (counter) counter->add(static_cast<std::uint64_t>(rows.size()) * a.cols() * b.cols());
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

std::vector<double> normalized(std::span<const double> a) {
    std::vector<double> out(a.begin(), a.end());
    const double n = norm(a);
    if (n > 0.0)
        for (double& x : out) x /= n;
    return out;
}

}  // namespace navprune
