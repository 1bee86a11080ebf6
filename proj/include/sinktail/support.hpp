#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sinktail/errors.hpp"
#include "sinktail/types.hpp"

#include "json.hpp"

namespace sinktail {

enum class SupportKind { Banded, Explicit, Augmented };

class SupportMask;
struct AugmentedSupport;
AugmentedSupport augment_dustbin(const SupportMask& base, Index dustbin_block);

// Active (query, key) edge set. Banded supports are the clipped symmetric
// band { (i,j) : |i-j| <= W } intersected with the row/column activity masks;
// explicit supports carry a sorted row-major edge list; augmented supports are
// dustbin-widened bands (see augment_dustbin).
class SupportMask {
public:
    SupportMask() = default;

    static SupportMask banded(Index n_rows, Index n_cols, Index half_band,
                              std::vector<bool> row_active = {},
                              std::vector<bool> col_active = {});
    static SupportMask explicit_edges(Index n_rows, Index n_cols,
                                      std::vector<std::pair<Index, Index>> edges,
                                      std::vector<bool> row_active = {},
                                      std::vector<bool> col_active = {});

    SupportKind kind() const { return kind_; }
    Index n_rows() const { return n_rows_; }
    Index n_cols() const { return n_cols_; }
    Index half_band() const { return half_band_; }
    Index dustbin_block() const { return dustbin_block_; }

    bool row_active(Index i) const { return row_active_[static_cast<size_t>(i)]; }
    bool col_active(Index j) const { return col_active_[static_cast<size_t>(j)]; }
    const std::vector<bool>& row_mask() const { return row_active_; }
    const std::vector<bool>& col_mask() const { return col_active_; }

    bool contains(Index i, Index j) const;

    // Visits active columns of row i in ascending order.
    template <class Fn>
    void for_each_in_row(Index i, Fn&& fn) const {
        if (!row_active(i)) return;
        if (kind_ == SupportKind::Explicit) {
            const size_t lo = row_ptr_[static_cast<size_t>(i)];
            const size_t hi = row_ptr_[static_cast<size_t>(i) + 1];
            for (size_t k = lo; k < hi; ++k) fn(col_idx_[k]);
        } else {
            const Index lo = std::max<Index>(0, i - half_band_);
            const Index hi = std::min<Index>(n_cols_ - 1, i + half_band_);
            for (Index j = lo; j <= hi; ++j) {
                if (col_active(j)) fn(j);
            }
        }
    }

    std::int64_t active_edge_count() const;
    Index active_row_count() const;
    Index active_col_count() const;

    // Throws InfeasibleSupport if an active row or column has no active edge.
    void validate() const;

    nlohmann::json to_json() const;
    static SupportMask from_json(const nlohmann::json& j);

private:
    SupportKind kind_ = SupportKind::Banded;
    Index n_rows_ = 0;
    Index n_cols_ = 0;
    Index half_band_ = 0;
    Index dustbin_block_ = 0;  // nonzero only for augmented masks
    std::vector<bool> row_active_;
    std::vector<bool> col_active_;
    // CSR edge storage, explicit kind only.
    std::vector<size_t> row_ptr_;
    std::vector<Index> col_idx_;

    friend struct AugmentedSupport;
    friend AugmentedSupport augment_dustbin(const SupportMask&, Index);
};

// Dustbin augmentation: one active slack token appended per side plus
// dustbin_block-1 inactive fillers, realized as a widened band of width
// max(W, L) intersected with the activity masks.
struct AugmentedSupport {
    SupportMask mask;   // the enlarged support the solver runs on
    SupportMask base;
    Index dustbin_row = 0;
    Index dustbin_col = 0;
    std::vector<Index> filler_rows;
    std::vector<Index> filler_cols;
    Index effective_band = 0;
};

SupportMask build_band_support(Index n_rows, Index n_cols, Index half_band,
                               std::vector<bool> row_mask = {},
                               std::vector<bool> col_mask = {});

struct TileRange {
    Index row_begin = 0;
    Index row_end = 0;  // exclusive
    Index col_begin = 0;
    Index col_end = 0;
    Index rows() const { return row_end - row_begin; }
    Index cols() const { return col_end - col_begin; }
};

// Fixed row-major tile cover of the active support. Each active edge belongs
// to exactly one tile; tiles with no active edge are dropped. The solver
// contract designates at most one resident plan tile at a time.
class TileSchedule {
public:
    static std::shared_ptr<const TileSchedule> build(SupportMask support, Index block);

    Index block() const { return block_; }
    const SupportMask& support() const { return support_; }
    const std::vector<TileRange>& tiles() const { return tiles_; }
    size_t tile_count() const { return tiles_.size(); }
    const BoolArray& tile_activity(size_t t) const { return activity_[t]; }
    std::int64_t active_edges() const { return active_edges_; }
    bool deterministic_order() const { return true; }

private:
    Index block_ = 0;
    SupportMask support_;
    std::vector<TileRange> tiles_;
    std::vector<BoolArray> activity_;
    std::int64_t active_edges_ = 0;
};

// Analytic storage ledger for the banded path: logical plan-factor bytes for
// the direct four-plan and one-reference backward, resident tile bytes, dual
// vector state, and QKV activations.
struct LedgerReport {
    Index seq_len = 0;
    Index half_band = 0;
    Index block = 0;
    Index head_dim = 0;
    Index bytes_per_scalar = 0;
    Index tail_depth = 0;
    Index base_depth = 0;
    std::int64_t active_entries = 0;
    std::int64_t direct_plan_bytes = 0;
    std::int64_t one_reference_plan_bytes = 0;
    std::int64_t direct_tile_bytes = 0;
    std::int64_t one_reference_tile_bytes = 0;
    std::int64_t tail_dual_bytes = 0;
    std::int64_t base_tail_dual_bytes = 0;
    std::int64_t qkv_bytes = 0;

    nlohmann::json to_json() const;
};

LedgerReport estimate_memory_ledger(Index seq_len, Index half_band, Index block, Index head_dim,
                                    Index bytes_per_scalar, Index tail_depth, Index base_depth);

// Closed-form active entry count of the all-active clipped band.
std::int64_t banded_entry_count(Index seq_len, Index half_band);

std::string mib_string(std::int64_t bytes, int decimals);

}  // namespace sinktail
