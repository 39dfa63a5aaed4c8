#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "posseq/possibility.hpp"

using namespace posseq;

namespace {

PossibilityDistribution abc() { return {{"a", "b", "c"}, {0.3, 1.0, 0.6}}; }

std::vector<std::string> ev(std::initializer_list<const char*> names) { return {names.begin(), names.end()}; }

} // namespace

TEST(PossibilityOfEvent, UniverseIsOneEmptyIsZero) {
    const auto d = abc();
    EXPECT_EQ(possibility_of_event(d, ev({"a", "b", "c"})), 1.0);
    EXPECT_EQ(possibility_of_event(d, ev({})), 0.0);
}

TEST(PossibilityOfEvent, MaxOverEvent) { EXPECT_EQ(possibility_of_event(abc(), ev({"a", "c"})), 0.6); }

TEST(PossibilityOfEvent, UnknownElement) {
    try {
        possibility_of_event(abc(), ev({"z"}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownElement);
    }
    EXPECT_THROW(necessity_of_event(abc(), ev({"z"})), Error);
}

TEST(NecessityOfEvent, Duality) {
    const auto d = abc();
    EXPECT_EQ(necessity_of_event(d, ev({"a", "b", "c"})), 1.0);
    EXPECT_DOUBLE_EQ(necessity_of_event(d, ev({"b"})), 0.4);
    // complement holds b with degree 1
    EXPECT_EQ(necessity_of_event(d, ev({"a", "c"})), 0.0);
}

TEST(PossibilityDistribution, MustBeNormalized) {
    EXPECT_THROW(PossibilityDistribution({"a", "b"}, {0.3, 0.9}), Error);
    EXPECT_THROW(PossibilityDistribution({"a", "b"}, {0.3, 1.2}), Error);
    EXPECT_THROW(PossibilityDistribution({"a", "a"}, {1.0, 1.0}), Error);
}

TEST(Bezdek, EqualDistancesGiveUniform) {
    const std::vector<double> d(4, 3.5);
    for (double u : bezdek_membership(d, 2.0)) EXPECT_DOUBLE_EQ(u, 0.25);
}

TEST(Bezdek, HandComputedPair) {
    // (1/1) / (1/1 + 1/4) and (1/4) / (1/1 + 1/4)
    const std::vector<double> d{1.0, 2.0};
    const auto u = bezdek_membership(d, 2.0);
    EXPECT_DOUBLE_EQ(u[0], 0.8);
    EXPECT_DOUBLE_EQ(u[1], 0.2);
}

TEST(Bezdek, SingleArea) {
    const std::vector<double> d{17.0};
    EXPECT_EQ(bezdek_membership(d, 2.0), std::vector<double>{1.0});
}

TEST(Bezdek, Errors) {
    const std::vector<double> zero{1.0, 0.0};
    try {
        bezdek_membership(zero, 2.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroDistance);
    }
    const std::vector<double> ok{1.0, 2.0};
    try {
        bezdek_membership(ok, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidFuzzifier);
    }
}

TEST(Bezdek, SumsToOneAndIsPermutationEquivariant) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(0.01, 500.0), fuzz(1.1, 4.0);
    std::uniform_int_distribution<int> count(1, 20);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> d(static_cast<std::size_t>(count(rng)));
        for (auto& v : d) v = dist(rng);
        const double m = fuzz(rng);
        const auto u = bezdek_membership(d, m);
        double s = 0.0;
        for (double v : u) {
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);

        std::vector<std::size_t> perm(d.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> pd(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) pd[i] = d[perm[i]];
        const auto pu = bezdek_membership(pd, m);
        for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(pu[i], u[perm[i]], 1e-15);
    }
}

TEST(Attachment, DividesByMax) {
    const std::vector<double> u{0.8, 0.2};
    const auto phi = attachment_degree(u);
    EXPECT_EQ(phi[0], 1.0);
    EXPECT_DOUBLE_EQ(phi[1], 0.25);
    const std::vector<double> same{0.25, 0.25, 0.25, 0.25};
    for (double p : attachment_degree(same)) EXPECT_EQ(p, 1.0);
    EXPECT_EQ(attachment_degree(std::vector<double>{1.0}), std::vector<double>{1.0});
}

TEST(PossibilityFar, Formula) {
    EXPECT_EQ(possibility_far(1.0, 1.5, 1.5), 1.0);
    EXPECT_DOUBLE_EQ(possibility_far(0.5, 3.0, 1.5), 0.25);
    EXPECT_LT(possibility_far(1.0, 1e9, 1.5), 1e-8);
    try {
        possibility_far(1.0, 1.0, 1.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RegionViolation);
    }
}

TEST(PossibilityFar, MonotoneInDistanceAndProximity) {
    double prev = 2.0;
    for (double d = 2.0; d < 50.0; d += 0.5) {
        const double p = possibility_far(0.7, d, 2.0);
        EXPECT_LT(p, prev);
        prev = p;
    }
    EXPECT_GT(possibility_far(0.7, 10.0, 3.0), possibility_far(0.7, 10.0, 2.0));
}

TEST(NecessityNear, WorkedExample) {
    EXPECT_NEAR(necessity_near(1.2, 1.5, 1.0), 0.1667, 0.0005);
    EXPECT_NEAR(necessity_near(1.0, 1.1, 1.0), 0.0909, 0.0005);
    // Approaching psi from below drives N to zero.
    EXPECT_LT(necessity_near(1.5 - 1e-9, 1.5, 1.0), 1e-8);
}

TEST(NecessityNear, RegionViolations) {
    EXPECT_THROW(necessity_near(1.5, 1.5, 1.0), Error);
    EXPECT_THROW(necessity_near(0.0, 1.5, 0.0), Error);
    EXPECT_THROW(necessity_near(1.0, 1.5, 1.2), Error);
}

TEST(NecessityNear, DecreasesTowardsProximityAtFixedRatio) {
    double prev = 2.0;
    for (double d = 0.1; d < 4.0; d += 0.1) {
        const double n = necessity_near(d, 4.0, d * 0.5);
        EXPECT_LT(n, prev);
        prev = n;
    }
}

namespace {

// Two kernels whose Near bands overlap at the probe fixation, with
// attraction 0.5 / 0.1, omega = 1 and distances 1.2 / 1.0.
struct WorkedExample {
    InterfaceLayout layout{{{"A1", {0, 0, 10, 10}}, {"A2", {12.2, 0, 10, 10}}}};
    AttractionStats stats;
    Fixation probe{0, 11.2, 5};

    WorkedExample() {
        stats.omega = 1.0;
        stats.raw = {0.5, 0.1};
        stats.normalized = {0.5, 0.1};
        stats.proximity = {1.5, 1.1};
    }
};

} // namespace

TEST(AssessFixation, WorkedExampleBothNear) {
    WorkedExample ex;
    EXPECT_NEAR(kernel_distance(ex.probe, ex.layout[0]), 1.2, 1e-12);
    EXPECT_NEAR(kernel_distance(ex.probe, ex.layout[1]), 1.0, 1e-12);
    const auto a = assess_fixation(ex.probe, ex.layout, ex.stats, 2.0);
    EXPECT_EQ(a[0].region, Region::Near);
    EXPECT_EQ(a[1].region, Region::Near);
    EXPECT_EQ(a[0].possibility, 1.0);
    EXPECT_EQ(a[1].possibility, 1.0);
    EXPECT_NEAR(a[0].necessity, 0.1667, 0.0005);
    EXPECT_NEAR(a[1].necessity, 0.0909, 0.0005);
    // The more attractive area wins although it is farther away.
    EXPECT_GT(a[0].necessity, a[1].necessity);
}

TEST(AssessFixation, KernelFixation) {
    WorkedExample ex;
    const auto a = assess_fixation({0, 5, 5}, ex.layout, ex.stats, 2.0);
    EXPECT_EQ(a[0].region, Region::Kernel);
    EXPECT_EQ(a[0].possibility, 1.0);
    EXPECT_EQ(a[0].necessity, 1.0);
    EXPECT_EQ(a[1].region, Region::Far);
    EXPECT_GT(a[1].possibility, 0.0);
    EXPECT_EQ(a[1].necessity, 0.0);
}

TEST(AssessFixation, FarFromEverything) {
    // Three areas; the fixation is far from all of them. Expected values by
    // evaluating the formulas by hand on the distances (40, 80, 120).
    const InterfaceLayout layout({{"P", {0, 0, 10, 10}}, {"Q", {0, 100, 10, 10}}, {"R", {0, 200, 10, 10}}});
    AttractionStats stats;
    stats.omega = 2.0;
    stats.raw = {1.0, 0.5, 0.25};
    stats.normalized = {1.0, 0.5, 0.25};
    stats.proximity = {3.0, 2.5, 2.25};
    const Fixation f{0, 50, 5};
    const auto a = assess_fixation(f, layout, stats, 2.0);
    // distances: P 40, Q hypot(40, 95), R hypot(40, 195)
    const double dp = 40.0, dq = std::hypot(40.0, 95.0), dr = std::hypot(40.0, 195.0);
    const double wp = 1 / (dp * dp), wq = 1 / (dq * dq), wr = 1 / (dr * dr);
    const double phip = 1.0, phiq = wq / wp, phir = wr / wp;
    EXPECT_NEAR(a[0].possibility, phip * 3.0 / dp, 1e-12);
    EXPECT_NEAR(a[1].possibility, phiq * 2.5 / dq, 1e-12);
    EXPECT_NEAR(a[2].possibility, phir * 2.25 / dr, 1e-12);
    for (const auto& x : a) {
        EXPECT_EQ(x.region, Region::Far);
        EXPECT_EQ(x.necessity, 0.0);
    }
    EXPECT_GT(a[0].possibility, a[1].possibility);
    EXPECT_GT(a[1].possibility, a[2].possibility);
}

TEST(AssessFixation, InvariantsOverRandomFixations) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> coord(0.0, 300.0), lam(0.01, 1.0), om(0.0, 15.0);
    const InterfaceLayout layout({{"A", {20, 20, 40, 30}}, {"B", {100, 20, 20, 20}}, {"C", {20, 150, 200, 40}},
                                  {"D", {250, 250, 30, 30}}});
    for (int trial = 0; trial < 200; ++trial) {
        AttractionStats stats;
        stats.omega = om(rng);
        for (std::size_t i = 0; i < layout.size(); ++i) {
            stats.raw.push_back(lam(rng));
            stats.normalized.push_back(stats.raw.back());
            stats.proximity.push_back(stats.raw.back() + stats.omega);
        }
        for (int k = 0; k < 50; ++k) {
            const Fixation f{0, coord(rng), coord(rng)};
            for (const auto& a : assess_fixation(f, layout, stats, 2.0)) {
                EXPECT_LE(a.necessity, a.possibility);
                switch (a.region) {
                case Region::Kernel:
                    EXPECT_EQ(a.possibility, 1.0);
                    EXPECT_EQ(a.necessity, 1.0);
                    break;
                case Region::Near:
                    EXPECT_EQ(a.possibility, 1.0);
                    EXPECT_GE(a.necessity, 0.0);
                    EXPECT_LT(a.necessity, 1.0);
                    break;
                case Region::Far:
                    EXPECT_EQ(a.necessity, 0.0);
                    EXPECT_GT(a.possibility, 0.0);
                    EXPECT_LE(a.possibility, 1.0);
                    break;
                }
            }
        }
    }
}

TEST(EventMeasures, MaxAndMinDecomposition) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> deg(names.size());
        for (auto& d : deg) d = u(rng);
        deg[trial % names.size()] = 1.0;
        const PossibilityDistribution dist(names, deg);
        std::vector<std::string> A, B, AuB, AnB;
        for (const auto& n : names) {
            const bool a = u(rng) < 0.5, b = u(rng) < 0.5;
            if (a) A.push_back(n);
            if (b) B.push_back(n);
            if (a || b) AuB.push_back(n);
            if (a && b) AnB.push_back(n);
        }
        EXPECT_EQ(possibility_of_event(dist, AuB),
                  std::max(possibility_of_event(dist, A), possibility_of_event(dist, B)));
        EXPECT_EQ(necessity_of_event(dist, AnB), std::min(necessity_of_event(dist, A), necessity_of_event(dist, B)));
        EXPECT_LE(necessity_of_event(dist, A), possibility_of_event(dist, A));
    }
}
