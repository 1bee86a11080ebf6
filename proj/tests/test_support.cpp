#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sinktail/support.hpp"

#include <set>

using namespace sinktail;

namespace {

// Independent enumeration of the clipped band, used to pin the banded counts.
std::int64_t brute_band_count(Index L_q, Index L_k, Index W) {
    std::int64_t n = 0;
    for (Index i = 0; i < L_q; ++i) {
        for (Index j = 0; j < L_k; ++j) {
            if (std::abs(i - j) <= W) ++n;
        }
    }
    return n;
}

}  // namespace

TEST_CASE("zero band is the diagonal") {
    SupportMask m = build_band_support(3, 3, 0);
    std::set<std::pair<Index, Index>> edges;
    for (Index i = 0; i < 3; ++i) {
        m.for_each_in_row(i, [&](Index j) { edges.insert({i, j}); });
    }
    CHECK(edges == std::set<std::pair<Index, Index>>{{0, 0}, {1, 1}, {2, 2}});
}

TEST_CASE("banded counts match brute-force enumeration") {
    for (Index L : {1, 2, 3, 5, 8, 13, 33, 64}) {
        for (Index W : {0, 1, 2, 3, 5, 8}) {
            SupportMask m = build_band_support(L, L, W);
            CHECK(m.active_edge_count() == brute_band_count(L, L, W));
            CHECK(banded_entry_count(L, W) == brute_band_count(L, L, W));
        }
    }
    SupportMask m = build_band_support(4, 4, 1);
    CHECK(m.active_edge_count() == 10);
}

TEST_CASE("rectangular bands measured on the index difference") {
    SupportMask m = build_band_support(4, 7, 3);
    CHECK(m.active_edge_count() == brute_band_count(4, 7, 3));
    CHECK(m.contains(0, 3));
    CHECK(!m.contains(0, 4));
    // Narrower bands leave far columns unreachable and are rejected.
    CHECK_THROWS_AS(build_band_support(4, 7, 2), InfeasibleSupport);
}

TEST_CASE("long-context band count") {
    CHECK(banded_entry_count(16384, 1024) == 32521216);
    SupportMask m = build_band_support(16384, 16384, 1024);
    CHECK(m.active_edge_count() == 32521216);
}

TEST_CASE("masked rows and columns shrink the band") {
    std::vector<bool> rows = {true, false, true, true};
    std::vector<bool> cols = {true, true, false, true};
    SupportMask m = build_band_support(4, 4, 1, rows, cols);
    CHECK(!m.contains(1, 1));  // inactive row
    CHECK(!m.contains(2, 2));  // inactive col
    CHECK(m.contains(2, 1));
    CHECK(m.contains(3, 3));
}

TEST_CASE("infeasible supports are rejected") {
    // Row 0 only reaches column 0, which is inactive.
    std::vector<bool> cols = {false, true, true};
    CHECK_THROWS_AS(build_band_support(3, 3, 0, {}, cols), InfeasibleSupport);
    // Active column with no active row in reach.
    std::vector<bool> rows = {true, true, false};
    CHECK_THROWS_AS(build_band_support(3, 3, 0, rows, {}), InfeasibleSupport);
}

TEST_CASE("explicit supports store sorted row-major edges") {
    SupportMask m = SupportMask::explicit_edges(3, 3, {{2, 1}, {0, 0}, {1, 2}, {0, 2}, {2, 1}});
    std::vector<std::pair<Index, Index>> seen;
    for (Index i = 0; i < 3; ++i) {
        m.for_each_in_row(i, [&](Index j) { seen.push_back({i, j}); });
    }
    CHECK(seen == std::vector<std::pair<Index, Index>>{{0, 0}, {0, 2}, {1, 2}, {2, 1}});
    CHECK(m.contains(0, 2));
    CHECK(!m.contains(2, 2));
}

TEST_CASE("dustbin augmentation by construction") {
    SupportMask base = build_band_support(4, 4, 1);
    AugmentedSupport aug = augment_dustbin(base, 2);
    CHECK(aug.mask.n_rows() == 6);
    CHECK(aug.mask.n_cols() == 6);
    CHECK(aug.dustbin_row == 4);
    CHECK(aug.dustbin_col == 4);
    CHECK(aug.effective_band == 4);
    CHECK(aug.filler_rows == std::vector<Index>{5});
    CHECK(aug.filler_cols == std::vector<Index>{5});
    CHECK(aug.mask.row_active(4));
    CHECK(!aug.mask.row_active(5));
    // Every active base row reaches the dustbin column and vice versa.
    for (Index i = 0; i < 4; ++i) {
        CHECK(aug.mask.contains(i, aug.dustbin_col));
        CHECK(aug.mask.contains(aug.dustbin_row, i));
    }
    CHECK(aug.mask.contains(aug.dustbin_row, aug.dustbin_col));
}

TEST_CASE("dustbin augmentation small cases") {
    {
        AugmentedSupport aug = augment_dustbin(build_band_support(2, 2, 2), 1);
        CHECK(aug.mask.n_rows() == 3);
        CHECK(aug.effective_band == 2);
        CHECK(aug.filler_rows.empty());
        CHECK(aug.mask.active_edge_count() == 9);  // dense active 3x3
    }
    {
        // Band widened to max(W, L) = 8 over 9 active indices per side.
        AugmentedSupport aug = augment_dustbin(build_band_support(8, 8, 2), 4);
        std::int64_t count = 0;
        for (Index i = 0; i < aug.mask.n_rows(); ++i) {
            for (Index j = 0; j < aug.mask.n_cols(); ++j) {
                const bool active = (i <= 8) && (j <= 8) && std::abs(i - j) <= 8;
                CHECK(aug.mask.contains(i, j) == active);
                if (active) ++count;
            }
        }
        CHECK(count == 81);
        CHECK(aug.mask.active_edge_count() == 81);
    }
}

TEST_CASE("tile schedule covers every active edge exactly once") {
    SupportMask m = build_band_support(13, 17, 4);
    auto sched = TileSchedule::build(m, 4);
    std::set<std::pair<Index, Index>> covered;
    std::int64_t total = 0;
    for (size_t t = 0; t < sched->tile_count(); ++t) {
        const TileRange& r = sched->tiles()[t];
        const BoolArray& act = sched->tile_activity(t);
        for (Index i = 0; i < r.rows(); ++i) {
            for (Index j = 0; j < r.cols(); ++j) {
                if (act(i, j)) {
                    auto [it, fresh] = covered.insert({r.row_begin + i, r.col_begin + j});
                    CHECK(fresh);
                    ++total;
                }
            }
        }
    }
    CHECK(total == m.active_edge_count());
    for (const auto& [i, j] : covered) CHECK(m.contains(i, j));
    CHECK(sched->active_edges() == total);
}

TEST_CASE("memory ledger reproduces the long-context figures") {
    LedgerReport r = estimate_memory_ledger(16384, 1024, 128, 64, 4, 2, 15);
    CHECK(r.active_entries == 32521216);
    CHECK(mib_string(r.direct_plan_bytes, 2) == "496.23");
    CHECK(mib_string(r.one_reference_plan_bytes, 2) == "124.06");
    CHECK(mib_string(r.direct_tile_bytes, 4) == "0.2500");
    CHECK(mib_string(r.one_reference_tile_bytes, 4) == "0.0625");
    CHECK(mib_string(r.tail_dual_bytes, 3) == "0.375");
    CHECK(mib_string(r.base_tail_dual_bytes, 2) == "2.25");
    CHECK(mib_string(r.qkv_bytes, 2) == "12.00");
}

TEST_CASE("ledger trivial case and exact 4x ratio") {
    LedgerReport r = estimate_memory_ledger(1, 0, 1, 1, 4, 2, 0);
    CHECK(r.active_entries == 1);
    CHECK(r.direct_plan_bytes == 16);
    CHECK(r.one_reference_plan_bytes == 4);
    // The direct/one-reference ratio is exactly 4 for every input.
    for (Index L : {1, 7, 64, 1000}) {
        for (Index W : {0, 3, 200}) {
            LedgerReport x = estimate_memory_ledger(L, W, 8, 4, 4, 2, 5);
            CHECK(x.direct_plan_bytes == 4 * x.one_reference_plan_bytes);
            CHECK(x.direct_tile_bytes == 4 * x.one_reference_tile_bytes);
        }
    }
}

TEST_CASE("support JSON round trip") {
    SupportMask m = build_band_support(5, 6, 2, {true, true, false, true, true}, {});
    SupportMask back = SupportMask::from_json(m.to_json());
    CHECK(back.n_rows() == 5);
    CHECK(back.n_cols() == 6);
    CHECK(back.half_band() == 2);
    for (Index i = 0; i < 5; ++i) {
        for (Index j = 0; j < 6; ++j) CHECK(back.contains(i, j) == m.contains(i, j));
    }

    SupportMask e = SupportMask::explicit_edges(3, 3, {{0, 0}, {1, 1}, {2, 1}});
    SupportMask eb = SupportMask::from_json(e.to_json());
    CHECK(eb.kind() == SupportKind::Explicit);
    CHECK(eb.active_edge_count() == 3);
    CHECK(eb.contains(2, 1));
}
