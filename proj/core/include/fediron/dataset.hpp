#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fediron/matrix.hpp"

namespace fediron {

/// Feature rows paired with integer class labels.
struct LabeledData {
    Matrix features;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
};

/// Row-wise concatenation. All parts must share a feature width.
LabeledData concat(std::span<const LabeledData> parts);

}  // namespace fediron
