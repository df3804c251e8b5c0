#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace navprune {

// Counts multiply-accumulate operations performed by matmul.
class MacCounter {
public:
    void add(std::uint64_t macs) { macs_ += macs; }
    std::uint64_t macs() const { return macs_; }
    std::uint64_t flops() const { return 2 * macs_; }
    void reset() { macs_ = 0; }

private:
    std::uint64_t macs_ = 0;
};

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// a (n x k) times b (k x m). Adds n*k*m to the counter when given.
Matrix matmul(const Matrix& a, const Matrix& b, MacCounter* counter = nullptr);

// Only the rows listed in `rows` are computed; the rest stay zero.
Matrix matmul_rows(const Matrix& a, const Matrix& b, std::span<const std::size_t> rows,
                   MacCounter* counter = nullptr);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);
std::vector<double> normalized(std::span<const double> a);

}  // namespace navprune
