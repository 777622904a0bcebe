#include <catch2/catch_amalgamated.hpp>

#include "superalign/icp.hpp"
#include "superalign/kabsch.hpp"
#include "superalign/metrics.hpp"
#include "superalign/ransac.hpp"

using namespace superalign;

namespace {

std::vector<Vec3> random_points(std::uint64_t seed, std::size_t n, double half = 1.0) {
    Rng rng(seed);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts.emplace_back(rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half));
    }
    return pts;
}

std::vector<Vec3> apply_all(const RigidTransform& t, const std::vector<Vec3>& pts) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(t.apply(p));
    return out;
}

}  // namespace

TEST_CASE("kabsch: src == dst gives the identity") {
    const auto pts = random_points(1, 20);
    const std::vector<double> w(pts.size(), 1.0);
    const RigidTransform t = weighted_kabsch_umeyama(pts, pts, w);
    CHECK((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.translation.norm() < 1e-12);
}

TEST_CASE("kabsch: pure translation is recovered exactly") {
    const auto src = random_points(2, 15);
    RigidTransform shift;
    shift.translation = Vec3(1, 2, 3);
    const auto dst = apply_all(shift, src);
    std::vector<double> w(src.size());
    Rng rng(3);
    for (auto& v : w) v = rng.uniform(0.1, 2.0);

    const RigidTransform t = weighted_kabsch_umeyama(src, dst, w);
    CHECK((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((t.translation - Vec3(1, 2, 3)).norm() < 1e-12);
}

TEST_CASE("kabsch: synthesize-and-recover on 50 random points") {
    for (int trial = 0; trial < 25; ++trial) {
        const auto src = random_points(100 + static_cast<std::uint64_t>(trial), 50);
        const RigidTransform gt = random_se3(200 + static_cast<std::uint64_t>(trial), 180.0, 2.0);
        const auto dst = apply_all(gt, src);
        const std::vector<double> w(src.size(), 1.0);
        const RigidTransform est = weighted_kabsch_umeyama(src, dst, w);
        // chord-based angle: the trace-acos form floors near sqrt(eps)
        CHECK(rad_to_deg(rotation_geodesic_angle(est.rotation, gt.rotation)) < 1e-8);
        CHECK(rte(est, gt) < 1e-10);
    }
}

TEST_CASE("kabsch: solution beats 1000 random perturbations of itself") {
    const auto src = random_points(7, 30);
    const RigidTransform gt = random_se3(8, 90.0, 1.0);
    auto dst = apply_all(gt, src);
    Rng rng(9);
    for (auto& p : dst) p += 0.05 * Vec3(rng.normal(), rng.normal(), rng.normal());
    std::vector<double> w(src.size());
    for (auto& v : w) v = rng.uniform(0.05, 1.0);

    const RigidTransform est = weighted_kabsch_umeyama(src, dst, w);
    const double best_sse = weighted_sse(src, dst, w, est);

    for (int k = 0; k < 1000; ++k) {
        const double angle = rng.uniform(1e-4, 0.2);
        const double shift = rng.uniform(1e-5, 0.05);
        RigidTransform perturbed = est;
        perturbed.rotation =
            Eigen::AngleAxisd(angle, random_unit_vector(rng)).toRotationMatrix() * est.rotation;
        perturbed.translation += shift * random_unit_vector(rng);
        CHECK(weighted_sse(src, dst, w, perturbed) >= best_sse);
    }
}

TEST_CASE("kabsch: mirrored configurations still yield a proper rotation") {
    const auto src = random_points(11, 25);
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.emplace_back(p.x(), p.y(), -p.z());  // reflection
    const std::vector<double> w(src.size(), 1.0);
    const RigidTransform t = weighted_kabsch_umeyama(src, dst, w);
    CHECK(t.rotation.determinant() == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(so3_residual(t.rotation) < 1e-9);
}

TEST_CASE("kabsch: weight scaling is a no-op") {
    const auto src = random_points(13, 12);
    const auto dst = random_points(14, 12);
    std::vector<double> w(src.size());
    Rng rng(15);
    for (auto& v : w) v = rng.uniform(0.1, 1.0);
    const RigidTransform a = weighted_kabsch_umeyama(src, dst, w);
    std::vector<double> w_scaled = w;
    for (auto& v : w_scaled) v *= 137.0;
    const RigidTransform b = weighted_kabsch_umeyama(src, dst, w_scaled);
    CHECK((a.rotation - b.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.translation - b.translation).norm() < 1e-12);
}

TEST_CASE("kabsch: zero-weight pairs never influence the result") {
    const auto src = random_points(16, 10);
    const auto dst = random_points(17, 10);
    std::vector<double> w(src.size(), 1.0);
    const RigidTransform base = weighted_kabsch_umeyama(src, dst, w);

    auto src2 = src;
    auto dst2 = dst;
    auto w2 = w;
    src2.emplace_back(100, -50, 3);
    dst2.emplace_back(-8, 0.5, 77);
    w2.push_back(0.0);
    const RigidTransform with_zero = weighted_kabsch_umeyama(src2, dst2, w2);
    CHECK((base.rotation - with_zero.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((base.translation - with_zero.translation).norm() < 1e-12);
}

TEST_CASE("kabsch: equivariance under rigid motions of either side") {
    const auto src = random_points(18, 20);
    const auto dst = random_points(19, 20);
    std::vector<double> w(src.size());
    Rng rng(20);
    for (auto& v : w) v = rng.uniform(0.2, 1.0);

    const RigidTransform t = weighted_kabsch_umeyama(src, dst, w);
    const RigidTransform a = random_se3(21, 120.0, 1.0);
    const RigidTransform b = random_se3(22, 120.0, 1.0);
    const RigidTransform t2 = weighted_kabsch_umeyama(apply_all(a, src), apply_all(b, dst), w);
    const RigidTransform expected = b.compose(t).compose(a.inverse());
    CHECK((t2.rotation - expected.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((t2.translation - expected.translation).norm() < 1e-9);
}

TEST_CASE("kabsch error paths") {
    const auto pts = random_points(23, 5);
    CHECK_THROWS_AS(weighted_kabsch_umeyama(pts, pts, std::vector<double>{1, 1}), Error);
    CHECK_THROWS_AS(weighted_kabsch_umeyama({pts[0], pts[1]}, {pts[0], pts[1]}, {1, 1}), Error);
    CHECK_THROWS_AS(weighted_kabsch_umeyama(pts, pts, {1, 1, 0, 0, 0}), Error);

    // collinear source points
    std::vector<Vec3> line, line_dst;
    for (int i = 0; i < 6; ++i) {
        line.emplace_back(i, 0, 0);
        line_dst.emplace_back(0, i, 0);
    }
    try {
        weighted_kabsch_umeyama(line, line_dst, std::vector<double>(6, 1.0));
        FAIL("expected degenerate-geometry");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateGeometry);
    }
}

namespace {

struct RansacFixture {
    WeightedCorrespondences wc;
    SuperpointSet sx, sy;
    RigidTransform gt;
};

// exact correspondences plus a configurable share of gross outliers
RansacFixture make_ransac_fixture(std::uint64_t seed, std::size_t inliers, std::size_t outliers) {
    RansacFixture f;
    Rng rng(seed);
    f.gt = random_se3(seed ^ 0xffULL, 60.0, 1.0);
    const auto src = random_points(seed + 1, inliers + outliers);
    for (std::size_t i = 0; i < src.size(); ++i) {
        f.sx.points.points.push_back(src[i]);
        if (i < inliers) {
            f.sy.points.points.push_back(f.gt.apply(src[i]));
        } else {
            f.sy.points.points.push_back(Vec3(rng.uniform(3, 6), rng.uniform(3, 6), rng.uniform(3, 6)));
        }
        f.wc.pairs.push_back({static_cast<int>(i), static_cast<int>(i), rng.uniform(0.2, 1.0)});
    }
    return f;
}

}  // namespace

TEST_CASE("ransac: all-inlier input recovers the ground truth for any seed") {
    const RansacFixture f = make_ransac_fixture(30, 40, 0);
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        RansacConfig cfg;
        cfg.seed = seed;
        const RansacResult r = ransac_estimate(f.wc, f.sx, f.sy, cfg);
        CHECK_FALSE(r.failed);
        CHECK(rad_to_deg(rotation_geodesic_angle(r.transform.rotation, f.gt.rotation)) < 1e-6);
    }
}

TEST_CASE("ransac: 70% gross outliers, 10k iterations, threshold 0.05") {
    const RansacFixture f = make_ransac_fixture(31, 30, 70);
    RansacConfig cfg;
    cfg.max_iterations = 10000;
    cfg.inlier_threshold = 0.05;
    cfg.seed = 4;
    const RansacResult r = ransac_estimate(f.wc, f.sx, f.sy, cfg);
    CHECK_FALSE(r.failed);
    CHECK(rre(r.transform, f.gt) < 1.0);
    CHECK(rte(r.transform, f.gt) < 0.02);
    CHECK(r.inliers.size() >= 30);
}

TEST_CASE("ransac: fixed seed is fully deterministic") {
    const RansacFixture f = make_ransac_fixture(32, 25, 25);
    RansacConfig cfg;
    cfg.seed = 12;
    const RansacResult a = ransac_estimate(f.wc, f.sx, f.sy, cfg);
    const RansacResult b = ransac_estimate(f.wc, f.sx, f.sy, cfg);
    CHECK(a.transform.rotation == b.transform.rotation);
    CHECK(a.transform.translation == b.transform.translation);
    CHECK(a.inliers == b.inliers);
}

TEST_CASE("ransac: weighted sampling variant still recovers") {
    const RansacFixture f = make_ransac_fixture(33, 30, 30);
    RansacConfig cfg;
    cfg.weighted_sampling = true;
    cfg.seed = 5;
    const RansacResult r = ransac_estimate(f.wc, f.sx, f.sy, cfg);
    CHECK_FALSE(r.failed);
    CHECK(rre(r.transform, f.gt) < 1.0);
}

TEST_CASE("ransac: fewer pairs than the sample size is a parameter error") {
    const RansacFixture f = make_ransac_fixture(34, 2, 0);
    RansacConfig cfg;
    CHECK_THROWS_AS(ransac_estimate(f.wc, f.sx, f.sy, cfg), Error);
}

TEST_CASE("ransac: hopeless correspondences come back flagged with identity") {
    // every pair maps somewhere different; no 3 consistent inliers exist
    RansacFixture f;
    Rng rng(36);
    for (int i = 0; i < 12; ++i) {
        f.sx.points.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        f.sy.points.points.emplace_back(100.0 * i, -50.0 * i, 3.0 + i * i);
        f.wc.pairs.push_back({i, i, 0.5});
    }
    RansacConfig cfg;
    cfg.max_iterations = 200;
    cfg.inlier_threshold = 1e-6;
    const RansacResult r = ransac_estimate(f.wc, f.sx, f.sy, cfg);
    CHECK(r.failed);
    CHECK((r.transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("icp: starting at the ground truth stays there") {
    PointCloud src;
    src.points = random_points(40, 300, 0.5);
    const RigidTransform gt = random_se3(41, 30.0, 0.3);
    const PointCloud dst = src.transformed(gt);
    IcpConfig cfg;
    const IcpResult r = icp_refine(src, dst, gt, cfg);
    CHECK_FALSE(r.stalled);
    CHECK(rre(r.transform, gt) < 1e-6);
    CHECK(r.residual < 1e-9);
}

TEST_CASE("icp: converges from a small perturbation with non-increasing residual") {
    PointCloud src;
    src.points = random_points(42, 400, 0.5);
    const RigidTransform gt = random_se3(43, 20.0, 0.2);
    const PointCloud dst = src.transformed(gt);

    const RigidTransform nudge = axis_angle_transform(Vec3::UnitY(), deg_to_rad(4.0), Vec3(0.02, 0, 0.01));
    const RigidTransform init = nudge.compose(gt);
    IcpConfig cfg;
    cfg.max_iterations = 60;
    cfg.convergence_epsilon = 1e-10;
    cfg.max_correspondence_distance = 0.3;

    const IcpResult r = icp_refine(src, dst, init, cfg);
    CHECK_FALSE(r.stalled);
    CHECK(r.iterations >= 1);
    CHECK(rre(r.transform, gt) < 0.5);
    CHECK(rte(r.transform, gt) < 0.01);

    // monotone descent: residual of the returned estimate must not exceed the
    // residual of the initialization
    const KdTree dst_index(dst);
    const auto rms_at = [&](const RigidTransform& t) {
        double sum = 0.0;
        int count = 0;
        for (const auto& p : src.points) {
            const auto [idx, d] = dst_index.nearest(t.apply(p));
            (void)idx;
            if (d <= cfg.max_correspondence_distance) {
                sum += d * d;
                ++count;
            }
        }
        return std::sqrt(sum / std::max(1, count));
    };
    CHECK(r.residual <= rms_at(init) + 1e-15);
}

TEST_CASE("icp: disjoint clouds beyond the cap stall") {
    PointCloud src, dst;
    src.points = random_points(44, 50, 0.5);
    for (const auto& p : src.points) dst.points.push_back(p + Vec3(100, 0, 0));
    IcpConfig cfg;
    cfg.max_correspondence_distance = 0.5;
    const IcpResult r = icp_refine(src, dst, RigidTransform::identity(), cfg);
    CHECK(r.stalled);
    CHECK((r.transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("icp rejects empty clouds") {
    PointCloud src;
    src.points = random_points(45, 5, 0.5);
    CHECK_THROWS_AS(icp_refine(src, PointCloud{}, RigidTransform::identity(), IcpConfig{}), Error);
}
