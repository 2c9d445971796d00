#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <span>
#include <vector>

#include <unistd.h>

#include "fediron/dataset.hpp"
#include "fediron/matrix.hpp"
#include "fediron/nn.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("fediron_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline fediron::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    fediron::Matrix m(rows, cols);
    for (auto& x : m.values()) x = d(gen);
    return m;
}

/// Gaussian blobs, one per class, far enough apart to be linearly separable.
inline fediron::LabeledData blobs(std::size_t per_class, std::size_t n_classes, std::size_t dims, double spread,
                                  std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    fediron::LabeledData d;
    d.features = fediron::Matrix(per_class * n_classes, dims);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t r = c * per_class + i;
            for (std::size_t k = 0; k < dims; ++k)
                d.features(r, k) = noise(gen) + (k % n_classes == c ? spread : 0.0);
            d.labels.push_back(static_cast<int>(c));
        }
    }
    return d;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace testing
