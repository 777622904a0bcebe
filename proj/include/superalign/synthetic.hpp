#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "superalign/kdtree.hpp"

namespace superalign {

enum class SyntheticShape { Cube, Sphere, LBracket };

inline SyntheticShape shape_from_name(const std::string& name) {
    if (name == "cube") return SyntheticShape::Cube;
    if (name == "sphere") return SyntheticShape::Sphere;
    if (name == "l_bracket") return SyntheticShape::LBracket;
    fail(ErrorCode::Parameter, "unknown shape '" + name + "' (cube, sphere, l_bracket)");
}

struct SyntheticPairSpec {
    int point_count = 1000;
    double overlap_fraction = 1.0;  // target mutual overlap in (0, 1]
    double noise_sigma = 0.0;       // meters of per-coordinate Gaussian jitter
    double max_angle_deg = 45.0;
    double max_translation = 0.5;
    std::uint64_t seed = 0;
    SyntheticShape shape = SyntheticShape::LBracket;

    void validate() const {
        if (point_count < 8) fail(ErrorCode::Parameter, "point_count must be >= 8");
        if (overlap_fraction <= 0.0 || overlap_fraction > 1.0) {
            fail(ErrorCode::Parameter, "overlap_fraction must be in (0, 1]");
        }
        if (noise_sigma < 0.0) fail(ErrorCode::Parameter, "noise_sigma must be >= 0");
    }
};

struct SyntheticPair {
    PointCloud source;
    PointCloud target;
    RigidTransform gt;  // maps source coordinates into the target frame
};

namespace detail {

// Wedged slab: axis-aligned footprint with a flat bottom and a top plane that
// climbs linearly along both footprint axes. The two bracket arms use opposed
// gradients and different extents, so the slab thickness field has a distinct
// value and gradient everywhere and no surface neighborhood of the assembled
// shape is congruent to another up to rotation or reflection.
struct WedgeSlab {
    Vec3 lo;            // footprint minimum and bottom z
    Vec3 hi;            // footprint maximum (z unused)
    double top_base;    // top height at the footprint minimum corner
    double slope_x;     // top height increase across the full x extent
    double slope_y;     // same across the y extent

    double top_height(const Vec3& p) const {
        const double tx = (p.x() - lo.x()) / (hi.x() - lo.x());
        const double ty = (p.y() - lo.y()) / (hi.y() - lo.y());
        return top_base + tx * slope_x + ty * slope_y;
    }

    double max_top() const {
        return top_base + std::max(0.0, slope_x) + std::max(0.0, slope_y);
    }

    bool contains(const Vec3& p) const {
        return p.x() > lo.x() && p.x() < hi.x() && p.y() > lo.y() && p.y() < hi.y() &&
               p.z() > lo.z() && p.z() < top_height(p);
    }

    Vec3 sample_surface(Rng& rng) const {
        // faces weighted by approximate area; sloped sides use rejection
        const double lx = hi.x() - lo.x();
        const double ly = hi.y() - lo.y();
        const double mean_thickness = top_base + 0.5 * (slope_x + slope_y) - lo.z();
        const double footprint = lx * ly;
        const double side_x = ly * mean_thickness;  // faces at x = lo/hi
        const double side_y = lx * mean_thickness;  // faces at y = lo/hi
        const double areas[6] = {footprint, footprint, side_x, side_x, side_y, side_y};
        double total = 0.0;
        for (double a : areas) total += a;

        while (true) {
            double pick = rng.uniform() * total;
            int face = 0;
            while (face < 5 && pick > areas[face]) {
                pick -= areas[face];
                ++face;
            }
            Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), 0.0);
            switch (face) {
                case 0: p.z() = lo.z(); return p;
                case 1: p.z() = top_height(p); return p;
                case 2: p.x() = lo.x(); break;
                case 3: p.x() = hi.x(); break;
                case 4: p.y() = lo.y(); break;
                case 5: p.y() = hi.y(); break;
            }
            p.z() = rng.uniform(lo.z(), max_top());
            if (p.z() <= top_height(p)) return p;
        }
    }
};

// Uniform-ish surface sample of the unit-scale shapes, centered at the origin.
inline Vec3 sample_shape_point(SyntheticShape shape, Rng& rng) {
    switch (shape) {
        case SyntheticShape::Sphere: {
            return 0.5 * random_unit_vector(rng);
        }
        case SyntheticShape::Cube: {
            // pick a face, then a uniform point on it
            const int face = static_cast<int>(rng.uniform_index(6));
            const int axis = face / 2;
            const double side = face % 2 == 0 ? -0.5 : 0.5;
            Vec3 p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
            p[axis] = side;
            return p;
        }
        case SyntheticShape::LBracket: {
            // long arm thickens along +x with a mild +y tilt; short arm thins
            // along +y with a mild +x tilt
            static const WedgeSlab arm_a{Vec3(-0.5, -0.5, -0.1), Vec3(0.5, -0.1, 0.0),
                                         0.04, 0.14, 0.06};
            static const WedgeSlab arm_b{Vec3(-0.5, -0.5, -0.12), Vec3(-0.15, 0.35, 0.0),
                                         0.2, 0.03, -0.18};
            const double area_a = 1.0 * 0.4, area_b = 0.35 * 0.85;  // footprint share
            while (true) {
                const bool pick_a = rng.uniform() * (area_a + area_b) < area_a;
                const Vec3 p = pick_a ? arm_a.sample_surface(rng) : arm_b.sample_surface(rng);
                if (pick_a ? arm_b.contains(p) : arm_a.contains(p)) continue;
                return p;
            }
        }
    }
    fail(ErrorCode::Parameter, "unhandled shape");
}

inline double mean_nn_spacing(const PointCloud& cloud) {
    const KdTree index(cloud);
    double total = 0.0;
    for (const auto& p : cloud.points) {
        const auto nn = index.knn(p, 2);  // first hit is the point itself
        total += nn.back().second;
    }
    return total / static_cast<double>(cloud.size());
}

// Fraction of a's points with a neighbor in b within the radius, symmetric.
inline double measured_overlap(const PointCloud& a, const PointCloud& b, double radius) {
    const auto one_way = [radius](const PointCloud& from, const PointCloud& to) {
        const KdTree index(to);
        std::size_t hits = 0;
        for (const auto& p : from.points) {
            if (index.nearest(p).second <= radius) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(from.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

}  // namespace detail

/// Seed-deterministic registration pair: a procedural surface cloud, two
/// half-space crops tuned until the measured mutual overlap is within 0.05 of
/// the target, independent Gaussian jitter, point shuffling, and a bounded
/// random rigid transform carrying the source into the target frame.
inline SyntheticPair generate_synthetic_pair(const SyntheticPairSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    PointCloud base;
    base.points.reserve(static_cast<std::size_t>(spec.point_count));
    for (int i = 0; i < spec.point_count; ++i) {
        base.points.push_back(detail::sample_shape_point(spec.shape, rng));
    }

    PointCloud source = base;
    PointCloud target_pre = base;  // in source coordinates until transformed

    if (spec.overlap_fraction < 1.0) {
        const double nn_radius = 2.0 * detail::mean_nn_spacing(base);
        bool found = false;
        for (int attempt = 0; attempt < 8 && !found; ++attempt) {
            const Vec3 dir = random_unit_vector(rng);
            std::vector<double> proj(base.size());
            for (std::size_t i = 0; i < base.size(); ++i) proj[i] = base.points[i].dot(dir);
            std::vector<double> sorted = proj;
            std::sort(sorted.begin(), sorted.end());

            // keep-fraction f per side: source keeps the low f-quantile, the
            // target keeps the high one; bisect f so the measured overlap hits
            // the requested value
            double f_lo = spec.overlap_fraction / (2.0 - spec.overlap_fraction);
            double lo = std::max(0.05, f_lo - 0.3), hi = std::min(1.0, f_lo + 0.3);
            for (int iter = 0; iter < 24; ++iter) {
                const double f = 0.5 * (lo + hi);
                const double keep = (1.0 + f) / 2.0;
                const double cut_src = sorted[static_cast<std::size_t>(
                    std::min<double>(static_cast<double>(base.size()) - 1.0,
                                     keep * static_cast<double>(base.size())))];
                const double cut_dst = sorted[static_cast<std::size_t>(
                    std::max(0.0, (1.0 - keep) * static_cast<double>(base.size())))];

                PointCloud cand_src, cand_dst;
                for (std::size_t i = 0; i < base.size(); ++i) {
                    if (proj[i] <= cut_src) cand_src.points.push_back(base.points[i]);
                    if (proj[i] >= cut_dst) cand_dst.points.push_back(base.points[i]);
                }
                if (cand_src.size() < 8 || cand_dst.size() < 8) break;

                const double measured = detail::measured_overlap(cand_src, cand_dst, nn_radius);
                if (std::abs(measured - spec.overlap_fraction) <= 0.04) {
                    source = cand_src;
                    target_pre = cand_dst;
                    found = true;
                    break;
                }
                if (measured > spec.overlap_fraction) {
                    hi = f;
                } else {
                    lo = f;
                }
            }
        }
        if (!found) {
            fail(ErrorCode::SpecInfeasible, "could not reach the requested overlap fraction");
        }
    }

    SyntheticPair pair;
    pair.gt = random_se3(spec.seed ^ 0x7ab5ULL, spec.max_angle_deg, spec.max_translation);
    pair.source = source;
    pair.target = target_pre.transformed(pair.gt);

    if (spec.noise_sigma > 0.0) {
        for (auto& p : pair.source.points) {
            p += spec.noise_sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
        }
        for (auto& p : pair.target.points) {
            p += spec.noise_sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
        }
    }

    // independent shuffles so index order carries no correspondence hint
    for (std::size_t i = pair.source.size(); i > 1; --i) {
        std::swap(pair.source.points[i - 1], pair.source.points[rng.uniform_index(i)]);
    }
    for (std::size_t i = pair.target.size(); i > 1; --i) {
        std::swap(pair.target.points[i - 1], pair.target.points[rng.uniform_index(i)]);
    }
    return pair;
}

}  // namespace superalign
