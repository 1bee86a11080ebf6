#pragma once

#include <memory>
#include <vector>

#include "sinktail/errors.hpp"
#include "sinktail/support.hpp"
#include "sinktail/types.hpp"

namespace sinktail {

// Dense per-tile storage aligned with a TileSchedule. Entries outside the
// active support are never read; they hold zero.
template <class Scalar>
struct BlockField {
    std::shared_ptr<const TileSchedule> schedule;
    std::vector<Matrix<Scalar>> blocks;

    BlockField() = default;
    explicit BlockField(std::shared_ptr<const TileSchedule> sched) : schedule(std::move(sched)) {
        blocks.reserve(schedule->tile_count());
        for (const TileRange& t : schedule->tiles()) {
            blocks.push_back(Matrix<Scalar>::Zero(t.rows(), t.cols()));
        }
    }
};

// Scores restricted to the active support. `raw` fields hold S_bar = QK^T/sqrt(d)
// with the temperature not yet absorbed; scaled fields hold S = S_bar/epsilon.
template <class Scalar>
struct ScoreField {
    Scalar epsilon = Scalar(1);
    bool raw = false;
    BlockField<Scalar> values;

    const TileSchedule& sched() const { return *values.schedule; }
    const SupportMask& support() const { return values.schedule->support(); }
};

template <class Scalar>
ScoreField<Scalar> scaled_scores(const Matrix<Scalar>& Q, const Matrix<Scalar>& K, Scalar epsilon,
                                 std::shared_ptr<const TileSchedule> schedule) {
    if (!(epsilon > Scalar(0))) throw InvalidTemperature("epsilon must be > 0");
    if (Q.cols() != K.cols()) throw std::invalid_argument("Q and K head dimensions differ");
    const SupportMask& m = schedule->support();
    if (Q.rows() != m.n_rows() || K.rows() != m.n_cols()) {
        throw std::invalid_argument("Q/K row counts do not match the support");
    }
    const Scalar inv = Scalar(1) / (std::sqrt(static_cast<Scalar>(Q.cols())) * epsilon);
    ScoreField<Scalar> s;
    s.epsilon = epsilon;
    s.raw = false;
    s.values = BlockField<Scalar>(schedule);
    for (size_t t = 0; t < schedule->tile_count(); ++t) {
        const TileRange& r = schedule->tiles()[t];
        Matrix<Scalar>& blk = s.values.blocks[t];
        blk.noalias() = Q.middleRows(r.row_begin, r.rows()) *
                        K.middleRows(r.col_begin, r.cols()).transpose();
        blk *= inv;
        blk = schedule->tile_activity(t).select(blk, Matrix<Scalar>::Zero(r.rows(), r.cols()));
    }
    return s;
}

// S_bar = QK^T/sqrt(d) with the temperature left to the per-stage scaling.
template <class Scalar>
ScoreField<Scalar> raw_scores(const Matrix<Scalar>& Q, const Matrix<Scalar>& K,
                              std::shared_ptr<const TileSchedule> schedule) {
    ScoreField<Scalar> s = scaled_scores<Scalar>(Q, K, Scalar(1), std::move(schedule));
    s.raw = true;
    return s;
}

template <class Scalar>
ScoreField<Scalar> scale_to_temperature(const ScoreField<Scalar>& raw, Scalar epsilon) {
    if (!(epsilon > Scalar(0))) throw InvalidTemperature("epsilon must be > 0");
    if (!raw.raw) throw std::invalid_argument("scale_to_temperature expects a raw score field");
    ScoreField<Scalar> s;
    s.epsilon = epsilon;
    s.raw = false;
    s.values.schedule = raw.values.schedule;
    s.values.blocks.reserve(raw.values.blocks.size());
    for (const auto& blk : raw.values.blocks) s.values.blocks.push_back(blk / epsilon);
    return s;
}

}  // namespace sinktail
