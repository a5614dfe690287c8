#pragma once

#include <optional>

namespace goldspot {

/// Ground-truth particle center, in pixel coordinates.
struct Annotation {
    double x = 0.0;
    double y = 0.0;
    std::optional<double> radius;

    bool operator==(const Annotation&) const = default;
};

}  // namespace goldspot
