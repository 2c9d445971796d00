#include "fediron/matrix.hpp"

#include <Eigen/Core>
#include <string>

namespace fediron {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return {m.values().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }
MutMap view(Matrix& m) { return {m.values().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw std::invalid_argument("Matrix: data length != rows * cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
    Matrix out(a.cols(), b.cols());
    if (a.rows() == 0) return out;
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

void add_row_vector(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) throw std::invalid_argument("add_row_vector: length mismatch");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    }
}

Vector column_sums(const Matrix& m) {
    Vector out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
    }
    return out;
}

Vector column_means(const Matrix& m) {
    Vector out = column_sums(m);
    if (m.rows() == 0) return out;
    for (auto& v : out) v /= static_cast<double>(m.rows());
    return out;
}

Matrix vstack(std::span<const Matrix> parts) {
    std::size_t rows = 0;
    std::size_t cols = parts.empty() ? 0 : parts.front().cols();
    for (const auto& p : parts) {
        if (p.rows() != 0) {
            cols = p.cols();
            break;
        }
    }
    for (const auto& p : parts) {
        if (p.cols() != cols && p.rows() != 0) throw std::invalid_argument("vstack: column mismatch");
        rows += p.rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
    return Matrix(rows, cols, std::move(data));
}

}  // namespace fediron
