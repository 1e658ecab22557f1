// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"
#include "usui/builder.hpp"

#include <gtest/gtest.h>

#include <random>
#include <utility>

using namespace usui;
using usui::testing::max_abs;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> one_based_pairs(const std::vector<ScheduleEntry>& s) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& e : s) out.emplace_back(e.mode_p + 1, e.mode_q + 1);
    return out;
}

}  // namespace

TEST(ModeIndex, Bijection) {
    for (std::size_t p = 0; p < 40; ++p) EXPECT_EQ(mode_index(slot_of(p), channel_of(p)), p);
    EXPECT_EQ(mode_index(3, Channel::signal), 6u);
    EXPECT_EQ(mode_index(3, Channel::idler), 7u);
}

TEST(Schedule, TenModes) {
    const auto s = interaction_schedule(10);
    const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{2, 3}, {2, 1}, {4, 5}, {4, 3}, {6, 7},
                                                                    {6, 5}, {8, 9}, {8, 7}, {9, 10}};
    EXPECT_EQ(one_based_pairs(s), pairs);
    const std::vector<Opa> opas = {Opa::first, Opa::second, Opa::first, Opa::second, Opa::first,
                                   Opa::second, Opa::first, Opa::second, Opa::second};
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s[i].opa, opas[i]) << i;
        EXPECT_EQ(s[i].order, i);
    }
}

TEST(Schedule, SixModes) {
    const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{2, 3}, {2, 1}, {4, 5}, {4, 3}, {5, 6}};
    const auto s = interaction_schedule(6);
    EXPECT_EQ(one_based_pairs(s), pairs);
    EXPECT_EQ(s.back().opa, Opa::second);
}

TEST(Schedule, StructureUpToForty) {
    for (std::size_t ext = 6; ext <= 40; ext += 2) {
        const auto s = interaction_schedule(ext);
        ASSERT_EQ(s.size(), ext - 1);
        std::vector<std::size_t> opa1_order(ext, SIZE_MAX);
        for (const auto& e : s) {
            if (e.opa == Opa::first) {
                // OPA1 joins the idler of one slot (0-based odd) with the next signal.
                EXPECT_EQ(e.mode_p % 2, 1u);
                EXPECT_EQ(e.mode_q, e.mode_p + 1);
                opa1_order[e.mode_p] = e.order;
            }
        }
        for (const auto& e : s) {
            if (e.opa != Opa::second) continue;
            const std::size_t idler = e.mode_p % 2 == 1 ? e.mode_p : e.mode_q;
            if (opa1_order[idler] != SIZE_MAX) EXPECT_LT(opa1_order[idler], e.order);
        }
    }
}

TEST(Schedule, Errors) {
    EXPECT_THROW(interaction_schedule(7), std::invalid_argument);
    EXPECT_THROW(interaction_schedule(4), std::invalid_argument);
}

TEST(Params, Validation) {
    EXPECT_THROW(UsuiParams::from_power_gains(0.9, 2.0, 0.0, 4), std::invalid_argument);
    EXPECT_THROW(UsuiParams::from_power_gains(2.0, 2.0, 0.0, 3), std::invalid_argument);
    EXPECT_THROW(UsuiParams::from_power_gains(2.0, 2.0, 0.0, 0), std::invalid_argument);
    EXPECT_THROW(UsuiParams::from_power_gains(2.0, 2.0, 0.0, 4, -1.0), std::invalid_argument);
    UsuiParams p{2.0, 1.0, 1.0, 0.0, 0.0, 4, 0.0};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    const auto q = UsuiParams::from_power_gains(2.0, 2.0, 0.0, 4);
    EXPECT_DOUBLE_EQ(q.v1(), 3.0);
    EXPECT_NEAR(q.c2(), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(q.total_gain(), 9.0, 1e-14);
}

TEST(Builder, SixModeExample) {
    const auto s = build_usui_state(UsuiParams::from_power_gains(2.0, 2.0, 0.0, 6));
    for (std::size_t p = 0; p < 6; ++p) EXPECT_NEAR(s.a(p, p).real(), 9.0, 1e-12);
    EXPECT_NEAR(s.a(0, 2).real(), 4.0, 1e-12);
    EXPECT_NEAR(s.b(0, 1).real(), 8.48528137423857, 1e-12);
    EXPECT_NEAR(s.b(1, 2).real(), 5.65685424949238, 1e-12);
    EXPECT_NEAR(s.b(0, 3).real(), 2.82842712474619, 1e-12);
}

TEST(Builder, OpaTwoOffGivesIndependentPairs) {
    const auto s = build_usui_state(UsuiParams::from_power_gains(5.0, 1.0, 0.3, 8));
    EXPECT_EQ(std::abs(s.a(0, 2)), 0.0);
    // Only the idler of slot n and the signal of slot n+1 are correlated.
    for (std::size_t p = 0; p < 8; ++p) {
        for (std::size_t q = 0; q < 8; ++q) {
            const bool paired = (p % 2 == 1 && q == p + 1) || (q % 2 == 1 && p == q + 1);
            if (!paired) EXPECT_EQ(std::abs(s.b(p, q)), 0.0) << p << "," << q;
        }
    }
    EXPECT_NEAR(s.b(1, 2).real(), 2.0 * std::sqrt(5.0 * 4.0), 1e-12);
}

TEST(Builder, MatchesExplicitSixModeMatrices) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 20; ++i) {
        const auto p = usui::testing::random_params(rng, 6);
        const auto s = build_usui_state(p);
        const auto ref = usui::testing::explicit_six_mode_blocks(p);
        EXPECT_LT(max_abs(s.block_a() - ref.a), 1e-9) << i;
        EXPECT_LT(max_abs(s.block_b() - ref.b), 1e-9) << i;
    }
}

TEST(ClosedForm, ParitySelectorsAndThetaPhase) {
    const double theta = M_PI / 3.0;
    const auto p = UsuiParams::from_power_gains(3.0, 2.5, theta, 8);
    const auto cf = closed_form_covariance(p);
    // p = 1 (odd) selects 2 V1 c2 e^{i theta} on the first off-diagonal.
    EXPECT_NEAR(std::abs(cf.b(1, 0) - 2.0 * p.v1() * p.c2() * std::polar(1.0, theta)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(cf.b(2, 1) - 2.0 * p.c1() * p.mu2 * p.mu2), 0.0, 1e-12);
    // A_{3,1} (1-based) carries e^{i theta (-1)^1}.
    EXPECT_NEAR(std::abs(cf.a(2, 0) - 2.0 * p.c1() * p.c2() * std::polar(1.0, -theta)), 0.0, 1e-12);
    const auto s = build_usui_state(p);
    EXPECT_LT(max_abs(s.block_a() - cf.a), 1e-10);
    EXPECT_LT(max_abs(s.block_b() - cf.b), 1e-10);
}

TEST(ClosedForm, MatchesExplicitSixModeMatrices) {
    const auto p = UsuiParams::from_power_gains(2.0, 2.0, 0.0, 6);
    const auto cf = closed_form_covariance(p);
    const auto ref = usui::testing::explicit_six_mode_blocks(p);
    EXPECT_LT(max_abs(cf.a - ref.a), 1e-14);
    EXPECT_LT(max_abs(cf.b - ref.b), 1e-14);
}

TEST(Properties, BuilderEqualsClosedForm) {
    std::mt19937_64 rng(23);
    for (std::size_t m = 2; m <= 20; m += 2) {
        for (int i = 0; i < 50; ++i) {
            const auto p = usui::testing::random_params(rng, m);
            const auto s = build_usui_state(p);
            const auto cf = closed_form_covariance(p);
            ASSERT_LT(max_abs(s.block_a() - cf.a), 1e-9) << "M=" << m << " draw " << i;
            ASSERT_LT(max_abs(s.block_b() - cf.b), 1e-9) << "M=" << m << " draw " << i;
        }
    }
}

TEST(Properties, MagnitudesThetaIndependent) {
    const auto base = build_usui_state(UsuiParams::from_power_gains(4.0, 7.0, 0.0, 10));
    for (double theta : {0.3, 1.2, 2.5, -2.0}) {
        const auto s = build_usui_state(UsuiParams::from_power_gains(4.0, 7.0, theta, 10));
        EXPECT_LT(RMatrix(s.block_a().cwiseAbs() - base.block_a().cwiseAbs()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(RMatrix(s.block_b().cwiseAbs() - base.block_b().cwiseAbs()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Properties, CorrelationRange) {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 10; ++i) {
        const auto s = build_usui_state(usui::testing::random_params(rng, 12));
        for (std::size_t p = 0; p < 12; ++p) {
            for (std::size_t q = 0; q < 12; ++q) {
                const std::size_t ds = slot_of(p) > slot_of(q) ? slot_of(p) - slot_of(q) : slot_of(q) - slot_of(p);
                if (ds >= 2) EXPECT_LT(std::abs(s.a(p, q)), 1e-10);
                const std::size_t d = p > q ? p - q : q - p;
                if (d != 1 && d != 3) EXPECT_LT(std::abs(s.b(p, q)), 1e-10);
            }
        }
    }
}

TEST(Properties, PaddingInsensitivity) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 10; ++i) {
        auto p = usui::testing::random_params(rng, 8);
        p.seed_x = 3.0;
        const auto two = build_usui_state(p, 2);
        const auto four = build_usui_state(p, 4);
        EXPECT_LT(max_abs(two.covariance() - four.covariance()), 1e-12 * max_abs(two.covariance()));
        EXPECT_LT((two.displacement() - four.displacement()).cwiseAbs().maxCoeff(),
                  1e-12 * two.displacement().cwiseAbs().maxCoeff());
    }
}

TEST(Properties, BuiltStatesArePhysical) {
    std::mt19937_64 rng(37);
    for (int i = 0; i < 20; ++i) EXPECT_TRUE(validate(build_usui_state(usui::testing::random_params(rng, 10))).passed);
}
