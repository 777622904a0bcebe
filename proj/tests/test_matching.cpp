#include <catch2/catch_amalgamated.hpp>

#include "superalign/matching.hpp"

using namespace superalign;

namespace {

FeatureMatrix features_from(std::initializer_list<std::initializer_list<double>> rows) {
    FeatureMatrix fm;
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = static_cast<Eigen::Index>(rows.begin()->size());
    fm.rows.resize(r, c);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (double v : row) fm.rows(i, j++) = v;
        ++i;
    }
    return fm;
}

FeatureMatrix random_features(std::uint64_t seed, Eigen::Index n, Eigen::Index d,
                              bool unit_rows = true) {
    Rng rng(seed);
    FeatureMatrix fm;
    fm.rows.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) fm.rows(i, j) = rng.normal();
        if (unit_rows) fm.rows.row(i).normalize();
    }
    return fm;
}

}  // namespace

TEST_CASE("global softmax: equal logits give uniform rows") {
    const FeatureMatrix fx = features_from({{1, 0}, {1, 0}});
    const FeatureMatrix fy = features_from({{0, 1}, {0, 2}, {0, 3}});
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);  // all logits 0
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(c.entries(i, j) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("global softmax: 2x2 identity logits closed form") {
    // logits [[1,0],[0,1]]; softmax row = [e/(e+1), 1/(e+1)]
    const FeatureMatrix fx = features_from({{1, 0}, {0, 1}});
    const FeatureMatrix fy = features_from({{1, 0}, {0, 1}});
    const CorrelationMatrix c = global_softmax_correlation(fx, fy, 1.0);
    CHECK(c.entries(0, 0) == Catch::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(c.entries(0, 1) == Catch::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(c.entries(1, 0) == Catch::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(c.entries(1, 1) == Catch::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("global softmax: a 20-logit margin saturates the row") {
    const FeatureMatrix fx = features_from({{20, 0}});
    const FeatureMatrix fy = features_from({{1, 0}, {0, 1}});
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);
    CHECK(c.entries(0, 0) >= 1.0 - 1e-8);
}

TEST_CASE("global softmax: rows sum to 1 and shift invariance holds") {
    const FeatureMatrix fx = random_features(10, 40, 8);
    const FeatureMatrix fy = random_features(11, 50, 8);
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);
    c.validate();

    // shifting a row's logits by a constant: append a coordinate that adds c_i
    // to every logit of row i
    Rng rng(12);
    FeatureMatrix fx_shift, fy_shift;
    fx_shift.rows.resize(fx.count(), fx.dim() + 1);
    fx_shift.rows.leftCols(fx.dim()) = fx.rows;
    for (Eigen::Index i = 0; i < fx.count(); ++i) fx_shift.rows(i, fx.dim()) = rng.uniform(-5, 5);
    fy_shift.rows.resize(fy.count(), fy.dim() + 1);
    fy_shift.rows.leftCols(fy.dim()) = fy.rows;
    fy_shift.rows.col(fy.dim()).setOnes();

    const CorrelationMatrix shifted = global_softmax_correlation(fx_shift, fy_shift);
    CHECK((shifted.entries - c.entries).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("global softmax: degenerate rows become uniform") {
    FeatureMatrix fx = random_features(13, 3, 4);
    fx.degenerate = {0, 1, 0};
    fx.rows.row(1).setZero();
    const FeatureMatrix fy = random_features(14, 5, 4);
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);
    for (Eigen::Index j = 0; j < 5; ++j) CHECK(c.entries(1, j) == Catch::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("global softmax rejects dimension mismatch") {
    CHECK_THROWS_AS(global_softmax_correlation(random_features(1, 3, 4), random_features(2, 3, 5)),
                    Error);
    CHECK_THROWS_AS(global_softmax_correlation(random_features(1, 3, 4), random_features(2, 3, 4), 0.0),
                    Error);
}

TEST_CASE("dual softmax: equal logits give a uniform matrix") {
    const FeatureMatrix fx = features_from({{1, 0}, {1, 0}});
    const FeatureMatrix fy = features_from({{0, 1}, {0, 2}});
    const CorrelationMatrix c = dual_softmax_correlation(fx, fy);
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            CHECK(c.entries(i, j) == Catch::Approx(0.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("dual softmax: 2x2 closed form") {
    const FeatureMatrix fx = features_from({{1.0, 0.0}, {0.2, 0.7}});
    const FeatureMatrix fy = features_from({{0.9, 0.1}, {-0.3, 0.8}});
    const Eigen::MatrixXd logits = fx.rows * fy.rows.transpose();

    // independent arithmetic: row softmax * column softmax, renormalized
    Eigen::MatrixXd expected(2, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double row_sm =
                std::exp(logits(i, j)) / (std::exp(logits(i, 0)) + std::exp(logits(i, 1)));
            const double col_sm =
                std::exp(logits(i, j)) / (std::exp(logits(0, j)) + std::exp(logits(1, j)));
            expected(i, j) = row_sm * col_sm;
        }
    }
    expected.row(0) /= expected.row(0).sum();
    expected.row(1) /= expected.row(1).sum();

    const CorrelationMatrix c = dual_softmax_correlation(fx, fy);
    CHECK((c.entries - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dual softmax: diagonal dominance survives, renormalization keeps argmax") {
    const FeatureMatrix fx = random_features(20, 12, 6);
    const CorrelationMatrix dual = dual_softmax_correlation(fx, fx);
    for (Eigen::Index i = 0; i < 12; ++i) {
        Eigen::Index argmax;
        dual.entries.row(i).maxCoeff(&argmax);
        CHECK(argmax == i);  // self-similarity dominates
    }
    dual.validate();
}

TEST_CASE("sinkhorn: uniform logits give the uniform doubly stochastic matrix") {
    const FeatureMatrix fx = features_from({{1, 0}, {1, 0}, {1, 0}});
    const FeatureMatrix fy = features_from({{0, 1}, {0, 1}, {0, 1}});
    SinkhornConfig cfg;
    cfg.slack = false;
    const Eigen::MatrixXd plan = sinkhorn_transport_plan(fx, fy, cfg);
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(plan(i, j) == Catch::Approx(1.0 / 3.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("sinkhorn: strongly diagonal logits converge to a near-permutation") {
    const FeatureMatrix fx = features_from({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    SinkhornConfig cfg;
    cfg.epsilon = 0.1;
    cfg.iterations = 100;
    cfg.slack = false;

    // assignment oracle: the identity permutation maximizes the diagonal logits
    const CorrelationMatrix c = sinkhorn_match(fx, fx, cfg);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(c.entries(i, i) >= 0.99);
}

TEST_CASE("sinkhorn: converged square plans are doubly stochastic within 1e-6") {
    const FeatureMatrix fx = random_features(30, 25, 10);
    const FeatureMatrix fy = random_features(31, 25, 10);
    SinkhornConfig cfg;  // defaults: eps 0.05, 100 iterations
    cfg.slack = false;
    const Eigen::MatrixXd plan = sinkhorn_transport_plan(fx, fy, cfg);
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
        CHECK(std::abs(plan.row(i).sum() - 1.0) < 1e-6);
    }
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
        CHECK(std::abs(plan.col(j).sum() - 1.0) < 1e-6);
    }
    CHECK((plan.array() > 0.0).all());  // strictly positive for finite epsilon
}

TEST_CASE("sinkhorn with slack still yields a valid correlation matrix") {
    const FeatureMatrix fx = random_features(32, 8, 6);
    const FeatureMatrix fy = random_features(33, 11, 6);
    SinkhornConfig cfg;  // slack on by default
    const CorrelationMatrix c = sinkhorn_match(fx, fy, cfg);
    CHECK(c.entries.rows() == 8);
    CHECK(c.entries.cols() == 11);
    c.validate();
}

TEST_CASE("extract: diagonal-dominant square matrix pairs (i, i)") {
    const FeatureMatrix fx = random_features(40, 10, 5);
    const CorrelationMatrix c = global_softmax_correlation(fx, fx);
    const WeightedCorrespondences wc = extract_correspondences(c, fx, fx);
    REQUIRE(wc.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(wc.pairs[i].src == static_cast<int>(i));
        CHECK(wc.pairs[i].dst == static_cast<int>(i));
        CHECK(wc.pairs[i].weight == c.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    }
}

TEST_CASE("extract: pair count is min(M, N)") {
    const FeatureMatrix fx = random_features(41, 3, 5);
    const FeatureMatrix fy = random_features(42, 5, 5);
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);
    CHECK(extract_correspondences(c, fx, fy).size() == 3);

    const CorrelationMatrix c2 = global_softmax_correlation(fy, fx);
    const WeightedCorrespondences wc2 = extract_correspondences(c2, fy, fx);
    CHECK(wc2.size() == 3);  // iterates the smaller column side
}

TEST_CASE("extract matches a brute-force per-row argmax on a 50x60 instance") {
    const FeatureMatrix fx = random_features(43, 50, 7);
    const FeatureMatrix fy = random_features(44, 60, 7);
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);
    const WeightedCorrespondences wc = extract_correspondences(c, fx, fy);
    REQUIRE(wc.size() == 50);
    for (Eigen::Index i = 0; i < 50; ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < 60; ++j) {
            if (c.entries(i, j) > c.entries(i, best)) best = static_cast<int>(j);
        }
        CHECK(wc.pairs[static_cast<std::size_t>(i)].dst == best);
    }
}

TEST_CASE("extract is invariant to permuting the larger set, up to relabeling") {
    const FeatureMatrix fx = random_features(45, 6, 5);
    const FeatureMatrix fy = random_features(46, 9, 5);
    const WeightedCorrespondences base =
        extract_correspondences(global_softmax_correlation(fx, fy), fx, fy);

    // reverse the target rows
    FeatureMatrix fy_perm;
    fy_perm.rows = fy.rows.colwise().reverse();
    const WeightedCorrespondences perm =
        extract_correspondences(global_softmax_correlation(fx, fy_perm), fx, fy_perm);

    REQUIRE(base.size() == perm.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(perm.pairs[i].src == base.pairs[i].src);
        CHECK(perm.pairs[i].dst == 9 - 1 - base.pairs[i].dst);
        CHECK(perm.pairs[i].weight == Catch::Approx(base.pairs[i].weight).epsilon(1e-12));
    }
}

TEST_CASE("extract: scaling all features never changes the argmax pair set") {
    const FeatureMatrix fx = random_features(47, 20, 6, false);
    const FeatureMatrix fy = random_features(48, 25, 6, false);
    const WeightedCorrespondences base =
        extract_correspondences(global_softmax_correlation(fx, fy), fx, fy);

    FeatureMatrix fx2 = fx, fy2 = fy;
    fx2.rows *= 3.0;
    fy2.rows *= 3.0;  // logits scale by 9, monotone
    const WeightedCorrespondences scaled =
        extract_correspondences(global_softmax_correlation(fx2, fy2), fx2, fy2);

    REQUIRE(base.size() == scaled.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(scaled.pairs[i].src == base.pairs[i].src);
        CHECK(scaled.pairs[i].dst == base.pairs[i].dst);
    }
}

TEST_CASE("extract: fully degenerate input is an error") {
    FeatureMatrix fx = random_features(49, 3, 4);
    fx.degenerate = {1, 1, 1};
    const FeatureMatrix fy = random_features(50, 4, 4);
    const CorrelationMatrix c = global_softmax_correlation(fx, fy);
    CHECK_THROWS_AS(extract_correspondences(c, fx, fy), Error);
}

TEST_CASE("filter: fraction 1.0 is the identity") {
    WeightedCorrespondences wc;
    for (int i = 0; i < 10; ++i) wc.pairs.push_back({i, i, 0.1 * i});
    const WeightedCorrespondences kept = filter_top_fraction(wc, 1.0);
    CHECK(kept.size() == 10);
}

TEST_CASE("filter: top 15% of 100 pairs keeps the 15 heaviest") {
    Rng rng(60);
    WeightedCorrespondences wc;
    for (int i = 0; i < 100; ++i) wc.pairs.push_back({i, i, rng.uniform()});
    const WeightedCorrespondences kept = filter_top_fraction(wc, 0.15);
    REQUIRE(kept.size() == 15);

    double min_kept = 1.0;
    for (const auto& pair : kept.pairs) min_kept = std::min(min_kept, pair.weight);
    std::vector<bool> in_kept(100, false);
    for (const auto& pair : kept.pairs) in_kept[static_cast<std::size_t>(pair.src)] = true;
    for (const auto& pair : wc.pairs) {
        if (!in_kept[static_cast<std::size_t>(pair.src)]) CHECK(pair.weight <= min_kept);
    }
}

TEST_CASE("filter: equal weights keep the first ceil(n/2) by index") {
    WeightedCorrespondences wc;
    for (int i = 0; i < 7; ++i) wc.pairs.push_back({i, i, 0.5});
    const WeightedCorrespondences kept = filter_top_fraction(wc, 0.5);
    REQUIRE(kept.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(kept.pairs[static_cast<std::size_t>(i)].src == i);
}

TEST_CASE("filter: nesting is monotone in the fraction") {
    Rng rng(61);
    WeightedCorrespondences wc;
    for (int i = 0; i < 40; ++i) wc.pairs.push_back({i, i, rng.uniform()});
    const auto small = filter_top_fraction(wc, 0.2);
    const auto large = filter_top_fraction(wc, 0.6);
    for (const auto& pair : small.pairs) {
        bool found = false;
        for (const auto& other : large.pairs) {
            if (other.src == pair.src) found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("filter: refusing to go below 3 pairs") {
    WeightedCorrespondences wc;
    for (int i = 0; i < 10; ++i) wc.pairs.push_back({i, i, 0.1});
    CHECK_THROWS_AS(filter_top_fraction(wc, 0.1), Error);  // would keep 1
    CHECK_THROWS_AS(filter_top_fraction(WeightedCorrespondences{}, 0.5), Error);
    CHECK_THROWS_AS(filter_top_fraction(wc, 0.0), Error);
    CHECK_THROWS_AS(filter_top_fraction(wc, 1.5), Error);
}

TEST_CASE("weight histogram: all-ones weights land in the last bin") {
    WeightedCorrespondences wc;
    for (int i = 0; i < 12; ++i) wc.pairs.push_back({i, i, 1.0});
    const WeightHistogram h = weight_histogram(wc, 10);
    REQUIRE(h.counts.size() == 10);
    CHECK(h.counts.back() == 12);
    for (std::size_t b = 0; b + 1 < h.counts.size(); ++b) CHECK(h.counts[b] == 0);
}

TEST_CASE("weight histogram: single pair gives a single count") {
    WeightedCorrespondences wc;
    wc.pairs.push_back({0, 0, 0.37});
    const WeightHistogram h = weight_histogram(wc, 5);
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 1);
    CHECK(h.counts[1] == 1);  // 0.37 in [0.2, 0.4)
}

TEST_CASE("weight histogram matches brute-force binning") {
    Rng rng(62);
    WeightedCorrespondences wc;
    for (int i = 0; i < 500; ++i) wc.pairs.push_back({i, i, rng.uniform()});
    const int bins = 16;
    const WeightHistogram h = weight_histogram(wc, bins);

    std::vector<std::size_t> expected(bins, 0);
    for (const auto& pair : wc.pairs) {
        int b = std::min(bins - 1, static_cast<int>(pair.weight * bins));
        expected[static_cast<std::size_t>(b)]++;
    }
    CHECK(h.counts == expected);
}
