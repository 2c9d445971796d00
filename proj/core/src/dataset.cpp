#include "fediron/dataset.hpp"

namespace fediron {

LabeledData concat(std::span<const LabeledData> parts) {
    std::vector<Matrix> mats;
    mats.reserve(parts.size());
    LabeledData out;
    for (const auto& p : parts) {
        mats.push_back(p.features);
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    out.features = vstack(mats);
    return out;
}

}  // namespace fediron
