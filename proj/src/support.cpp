#include "sinktail/support.hpp"

#include <algorithm>
#include <cstdio>

namespace sinktail {

namespace {

std::vector<bool> resolve_mask(std::vector<bool> mask, Index n, const char* side) {
    if (mask.empty()) return std::vector<bool>(static_cast<size_t>(n), true);
    if (static_cast<Index>(mask.size()) != n) {
        throw std::invalid_argument(std::string(side) + " mask size does not match dimension");
    }
    return mask;
}

}  // namespace

SupportMask SupportMask::banded(Index n_rows, Index n_cols, Index half_band,
                                std::vector<bool> row_active, std::vector<bool> col_active) {
    if (n_rows < 1 || n_cols < 1) throw std::invalid_argument("support dimensions must be >= 1");
    if (half_band < 0) throw std::invalid_argument("half band width must be >= 0");
    SupportMask m;
    m.kind_ = SupportKind::Banded;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.half_band_ = half_band;
    m.row_active_ = resolve_mask(std::move(row_active), n_rows, "row");
    m.col_active_ = resolve_mask(std::move(col_active), n_cols, "col");
    return m;
}

SupportMask SupportMask::explicit_edges(Index n_rows, Index n_cols,
                                        std::vector<std::pair<Index, Index>> edges,
                                        std::vector<bool> row_active, std::vector<bool> col_active) {
    if (n_rows < 1 || n_cols < 1) throw std::invalid_argument("support dimensions must be >= 1");
    SupportMask m;
    m.kind_ = SupportKind::Explicit;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.row_active_ = resolve_mask(std::move(row_active), n_rows, "row");
    m.col_active_ = resolve_mask(std::move(col_active), n_cols, "col");
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    m.row_ptr_.assign(static_cast<size_t>(n_rows) + 1, 0);
    m.col_idx_.reserve(edges.size());
    for (const auto& [i, j] : edges) {
        if (i < 0 || i >= n_rows || j < 0 || j >= n_cols) {
            throw std::invalid_argument("edge index out of range");
        }
        if (!m.row_active_[static_cast<size_t>(i)] || !m.col_active_[static_cast<size_t>(j)]) {
            continue;  // edges on inactive rows/cols carry no mass
        }
        m.row_ptr_[static_cast<size_t>(i) + 1]++;
        m.col_idx_.push_back(j);
    }
    for (size_t i = 1; i < m.row_ptr_.size(); ++i) m.row_ptr_[i] += m.row_ptr_[i - 1];
    return m;
}

bool SupportMask::contains(Index i, Index j) const {
    if (i < 0 || i >= n_rows_ || j < 0 || j >= n_cols_) return false;
    if (!row_active(i) || !col_active(j)) return false;
    if (kind_ == SupportKind::Explicit) {
        const size_t lo = row_ptr_[static_cast<size_t>(i)];
        const size_t hi = row_ptr_[static_cast<size_t>(i) + 1];
        return std::binary_search(col_idx_.begin() + static_cast<std::ptrdiff_t>(lo),
                                  col_idx_.begin() + static_cast<std::ptrdiff_t>(hi), j);
    }
    const Index diff = i > j ? i - j : j - i;
    return diff <= half_band_;
}

std::int64_t SupportMask::active_edge_count() const {
    std::int64_t count = 0;
    for (Index i = 0; i < n_rows_; ++i) {
        for_each_in_row(i, [&](Index) { ++count; });
    }
    return count;
}

Index SupportMask::active_row_count() const {
    return static_cast<Index>(std::count(row_active_.begin(), row_active_.end(), true));
}

Index SupportMask::active_col_count() const {
    return static_cast<Index>(std::count(col_active_.begin(), col_active_.end(), true));
}

void SupportMask::validate() const {
    std::vector<bool> col_hit(static_cast<size_t>(n_cols_), false);
    for (Index i = 0; i < n_rows_; ++i) {
        if (!row_active(i)) continue;
        Index deg = 0;
        for_each_in_row(i, [&](Index j) {
            ++deg;
            col_hit[static_cast<size_t>(j)] = true;
        });
        if (deg == 0) {
            throw InfeasibleSupport("active row " + std::to_string(i) + " has no active edge");
        }
    }
    for (Index j = 0; j < n_cols_; ++j) {
        if (col_active(j) && !col_hit[static_cast<size_t>(j)]) {
            throw InfeasibleSupport("active column " + std::to_string(j) + " has no active edge");
        }
    }
}

SupportMask build_band_support(Index n_rows, Index n_cols, Index half_band,
                               std::vector<bool> row_mask, std::vector<bool> col_mask) {
    SupportMask m = SupportMask::banded(n_rows, n_cols, half_band, std::move(row_mask),
                                        std::move(col_mask));
    m.validate();
    return m;
}

AugmentedSupport augment_dustbin(const SupportMask& base, Index dustbin_block) {
    if (dustbin_block < 1) throw std::invalid_argument("dustbin block must be >= 1");
    base.validate();

    AugmentedSupport aug;
    aug.base = base;
    const Index rows = base.n_rows() + dustbin_block;
    const Index cols = base.n_cols() + dustbin_block;
    aug.dustbin_row = base.n_rows();
    aug.dustbin_col = base.n_cols();
    aug.effective_band = std::max(base.half_band(), std::max(base.n_rows(), base.n_cols()));

    std::vector<bool> row_active(static_cast<size_t>(rows), false);
    std::vector<bool> col_active(static_cast<size_t>(cols), false);
    for (Index i = 0; i < base.n_rows(); ++i) row_active[static_cast<size_t>(i)] = base.row_active(i);
    for (Index j = 0; j < base.n_cols(); ++j) col_active[static_cast<size_t>(j)] = base.col_active(j);
    row_active[static_cast<size_t>(aug.dustbin_row)] = true;
    col_active[static_cast<size_t>(aug.dustbin_col)] = true;
    for (Index k = 1; k < dustbin_block; ++k) {
        aug.filler_rows.push_back(aug.dustbin_row + k);
        aug.filler_cols.push_back(aug.dustbin_col + k);
    }

    aug.mask = SupportMask::banded(rows, cols, aug.effective_band, std::move(row_active),
                                   std::move(col_active));
    aug.mask.kind_ = SupportKind::Augmented;
    aug.mask.dustbin_block_ = dustbin_block;
    aug.mask.validate();
    return aug;
}

std::shared_ptr<const TileSchedule> TileSchedule::build(SupportMask support, Index block) {
    if (block < 1) throw std::invalid_argument("tile block must be >= 1");
    support.validate();
    auto sched = std::make_shared<TileSchedule>();
    sched->block_ = block;
    sched->support_ = std::move(support);
    const SupportMask& m = sched->support_;
    const Index row_tiles = (m.n_rows() + block - 1) / block;
    const Index col_tiles = (m.n_cols() + block - 1) / block;
    for (Index bi = 0; bi < row_tiles; ++bi) {
        for (Index bj = 0; bj < col_tiles; ++bj) {
            TileRange r;
            r.row_begin = bi * block;
            r.row_end = std::min(m.n_rows(), r.row_begin + block);
            r.col_begin = bj * block;
            r.col_end = std::min(m.n_cols(), r.col_begin + block);
            BoolArray act(r.rows(), r.cols());
            act.setConstant(false);
            std::int64_t edges = 0;
            for (Index i = r.row_begin; i < r.row_end; ++i) {
                if (!m.row_active(i)) continue;
                m.for_each_in_row(i, [&](Index j) {
                    if (j >= r.col_begin && j < r.col_end) {
                        act(i - r.row_begin, j - r.col_begin) = true;
                        ++edges;
                    }
                });
            }
            if (edges > 0) {
                sched->tiles_.push_back(r);
                sched->activity_.push_back(std::move(act));
                sched->active_edges_ += edges;
            }
        }
    }
    return sched;
}

std::int64_t banded_entry_count(Index seq_len, Index half_band) {
    const std::int64_t L = seq_len;
    const std::int64_t W = std::min<std::int64_t>(half_band, L - 1);
    return L * (2 * W + 1) - W * (W + 1);
}

LedgerReport estimate_memory_ledger(Index seq_len, Index half_band, Index block, Index head_dim,
                                    Index bytes_per_scalar, Index tail_depth, Index base_depth) {
    if (seq_len < 1 || block < 1 || head_dim < 1 || bytes_per_scalar < 1) {
        throw std::invalid_argument("ledger parameters must be >= 1");
    }
    LedgerReport r;
    r.seq_len = seq_len;
    r.half_band = half_band;
    r.block = block;
    r.head_dim = head_dim;
    r.bytes_per_scalar = bytes_per_scalar;
    r.tail_depth = tail_depth;
    r.base_depth = base_depth;
    r.active_entries = banded_entry_count(seq_len, half_band);
    r.direct_plan_bytes = 4 * r.active_entries * bytes_per_scalar;
    r.one_reference_plan_bytes = r.active_entries * bytes_per_scalar;
    r.direct_tile_bytes = 4 * block * block * bytes_per_scalar;
    r.one_reference_tile_bytes = block * block * bytes_per_scalar;
    r.tail_dual_bytes = 2 * (tail_depth + 1) * seq_len * bytes_per_scalar;
    r.base_tail_dual_bytes = 2 * (base_depth + tail_depth + 1) * seq_len * bytes_per_scalar;
    r.qkv_bytes = 3 * seq_len * head_dim * bytes_per_scalar;
    return r;
}

std::string mib_string(std::int64_t bytes, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals,
                  static_cast<double>(bytes) / (1024.0 * 1024.0));
    return buf;
}

namespace {

nlohmann::json mask_to_json(const std::vector<bool>& mask) {
    nlohmann::json arr = nlohmann::json::array();
    for (bool b : mask) arr.push_back(b ? 1 : 0);
    return arr;
}

std::vector<bool> mask_from_json(const nlohmann::json& arr) {
    std::vector<bool> mask;
    mask.reserve(arr.size());
    for (const auto& v : arr) mask.push_back(v.get<int>() != 0);
    return mask;
}

}  // namespace

nlohmann::json SupportMask::to_json() const {
    nlohmann::json j;
    switch (kind_) {
        case SupportKind::Banded: j["kind"] = "banded"; break;
        case SupportKind::Explicit: j["kind"] = "explicit"; break;
        case SupportKind::Augmented: j["kind"] = "augmented"; break;
    }
    j["L_q"] = n_rows_;
    j["L_k"] = n_cols_;
    j["W"] = half_band_;
    j["dustbin_block"] = dustbin_block_;
    j["row_mask"] = mask_to_json(row_active_);
    j["col_mask"] = mask_to_json(col_active_);
    if (kind_ == SupportKind::Explicit) {
        nlohmann::json edges = nlohmann::json::array();
        for (Index i = 0; i < n_rows_; ++i) {
            for_each_in_row(i, [&](Index jj) { edges.push_back({i, jj}); });
        }
        j["edges"] = std::move(edges);
    }
    return j;
}

SupportMask SupportMask::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const Index rows = j.at("L_q").get<Index>();
    const Index cols = j.at("L_k").get<Index>();
    std::vector<bool> row_mask = mask_from_json(j.at("row_mask"));
    std::vector<bool> col_mask = mask_from_json(j.at("col_mask"));
    if (kind == "explicit") {
        std::vector<std::pair<Index, Index>> edges;
        for (const auto& e : j.at("edges")) {
            edges.emplace_back(e.at(0).get<Index>(), e.at(1).get<Index>());
        }
        return explicit_edges(rows, cols, std::move(edges), std::move(row_mask), std::move(col_mask));
    }
    SupportMask m = banded(rows, cols, j.at("W").get<Index>(), std::move(row_mask), std::move(col_mask));
    if (kind == "augmented") {
        m.kind_ = SupportKind::Augmented;
        m.dustbin_block_ = j.at("dustbin_block").get<Index>();
    }
    return m;
}

nlohmann::json LedgerReport::to_json() const {
    nlohmann::json j;
    j["L"] = seq_len;
    j["W"] = half_band;
    j["B"] = block;
    j["d"] = head_dim;
    j["bytes_per_scalar"] = bytes_per_scalar;
    j["T"] = base_depth;
    j["R"] = tail_depth;
    j["active_entries"] = active_entries;
    j["direct_plan_bytes"] = direct_plan_bytes;
    j["one_reference_plan_bytes"] = one_reference_plan_bytes;
    j["direct_tile_bytes"] = direct_tile_bytes;
    j["one_reference_tile_bytes"] = one_reference_tile_bytes;
    j["tail_dual_bytes"] = tail_dual_bytes;
    j["base_tail_dual_bytes"] = base_tail_dual_bytes;
    j["qkv_bytes"] = qkv_bytes;
    j["direct_plan_mib"] = mib_string(direct_plan_bytes, 2);
    j["one_reference_plan_mib"] = mib_string(one_reference_plan_bytes, 2);
    j["direct_tile_mib"] = mib_string(direct_tile_bytes, 4);
    j["one_reference_tile_mib"] = mib_string(one_reference_tile_bytes, 4);
    j["tail_dual_mib"] = mib_string(tail_dual_bytes, 3);
    j["base_tail_dual_mib"] = mib_string(base_tail_dual_bytes, 2);
    j["qkv_mib"] = mib_string(qkv_bytes, 2);
    return j;
}

}  // namespace sinktail
