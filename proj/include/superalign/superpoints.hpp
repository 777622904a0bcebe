#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include "superalign/geometry.hpp"

namespace superalign {

/// Downsampled representatives of a cloud. Superpoint i is the centroid of the
/// original points listed in parents[i].
struct SuperpointSet {
    PointCloud points;
    std::vector<std::vector<int>> parents;

    std::size_t size() const { return points.size(); }
};

/// One superpoint per occupied voxel, placed at the member centroid. Output is
/// ordered by ascending lexicographic (x, y, z) voxel coordinate.
inline SuperpointSet voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (voxel_size <= 0.0) fail(ErrorCode::Parameter, "voxel_size must be positive");
    if (cloud.empty()) fail(ErrorCode::EmptyInput, "voxel_downsample on empty cloud");

    using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
    std::map<Key, std::vector<int>> cells;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const Key key{static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                      static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                      static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
        cells[key].push_back(static_cast<int>(i));
    }

    SuperpointSet out;
    out.points.points.reserve(cells.size());
    out.parents.reserve(cells.size());
    for (auto& [key, members] : cells) {
        Vec3 c = Vec3::Zero();
        for (int idx : members) c += cloud.points[static_cast<std::size_t>(idx)];
        c /= static_cast<double>(members.size());
        out.points.points.push_back(c);
        out.parents.push_back(std::move(members));
    }
    return out;
}

}  // namespace superalign
