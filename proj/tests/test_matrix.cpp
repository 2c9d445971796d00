#include <doctest.h>

#include <random>
#include <vector>

#include "fediron/dataset.hpp"
#include "fediron/matrix.hpp"
#include "support.hpp"

using namespace fediron;

namespace {

// Straight triple loop used as the reference product.
Matrix naive(const Matrix& a, const Matrix& b, bool ta, bool tb) {
    const std::size_t n = ta ? a.cols() : a.rows();
    const std::size_t k = ta ? a.rows() : a.cols();
    const std::size_t m = tb ? b.rows() : b.cols();
    Matrix out(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += (ta ? a(p, i) : a(i, p)) * (tb ? b(j, p) : b(p, j));
            out(i, j) = s;
        }
    return out;
}

}  // namespace

TEST_CASE("products agree with the naive reference") {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + gen() % 9, k = 1 + gen() % 9, m = 1 + gen() % 9;
        const auto a = testing::random_matrix(n, k, gen);
        const auto b = testing::random_matrix(k, m, gen);
        const auto bt = testing::random_matrix(m, k, gen);
        const auto at = testing::random_matrix(k, n, gen);
        CHECK(testing::max_abs_diff(matmul(a, b).values(), naive(a, b, false, false).values()) < 1e-12);
        CHECK(testing::max_abs_diff(matmul_nt(a, bt).values(), naive(a, bt, false, true).values()) < 1e-12);
        CHECK(testing::max_abs_diff(matmul_tn(at, b).values(), naive(at, b, true, false).values()) < 1e-12);
    }
}

TEST_CASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(matmul_nt(Matrix(2, 3), Matrix(2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(matmul_tn(Matrix(2, 3), Matrix(3, 3)), std::invalid_argument);
}

TEST_CASE("row helpers") {
    Matrix m{{1, 2}, {3, 4}, {5, 6}};
    add_row_vector(m, std::vector<double>{10, 20});
    CHECK(m == Matrix{{11, 22}, {13, 24}, {15, 26}});
    CHECK(column_sums(m) == Vector{39, 72});
    CHECK(column_means(m) == Vector{13, 24});

    const std::vector<std::size_t> idx{2, 0};
    CHECK(m.gather_rows(idx) == Matrix{{15, 26}, {11, 22}});
}

TEST_CASE("vstack and concat") {
    const std::vector<Matrix> parts{Matrix(0, 0), Matrix{{1, 2}}, Matrix{{3, 4}, {5, 6}}};
    CHECK(vstack(parts) == Matrix{{1, 2}, {3, 4}, {5, 6}});
    const std::vector<Matrix> bad{Matrix{{1, 2}}, Matrix{{1, 2, 3}}};
    CHECK_THROWS_AS(vstack(bad), std::invalid_argument);

    const std::vector<LabeledData> data{{Matrix{{1, 2}}, {0}}, {Matrix{{3, 4}}, {1}}};
    const auto joined = concat(data);
    CHECK(joined.size() == 2);
    CHECK(joined.labels == std::vector<int>{0, 1});
    CHECK(joined.features == Matrix{{1, 2}, {3, 4}});
}
