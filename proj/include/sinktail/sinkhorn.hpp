#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "sinktail/score.hpp"
#include "sinktail/trace.hpp"

namespace sinktail {

// u_i = -log sum_{j active} exp(S_ij + v_j), reduced with per-row max
// subtraction. Masked entries are excluded from the reduction rather than
// filled with a sentinel; inactive rows keep u_i = 0.
template <class Scalar>
Vector<Scalar> row_half_step(const ScoreField<Scalar>& S, const Vector<Scalar>& v) {
    const TileSchedule& sched = S.sched();
    const SupportMask& m = sched.support();
    const Index n = m.n_rows();
    constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

    Vector<Scalar> row_max = Vector<Scalar>::Constant(n, kNegInf);
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar>& blk = S.values.blocks[t];
        const BoolArray& act = sched.tile_activity(t);
        for (Index i = 0; i < r.rows(); ++i) {
            Scalar mx = row_max[r.row_begin + i];
            for (Index j = 0; j < r.cols(); ++j) {
                if (!act(i, j)) continue;
                const Scalar x = blk(i, j) + v[r.col_begin + j];
                if (x > mx) mx = x;
            }
            row_max[r.row_begin + i] = mx;
        }
    }
    Vector<Scalar> acc = Vector<Scalar>::Zero(n);
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar>& blk = S.values.blocks[t];
        const BoolArray& act = sched.tile_activity(t);
        for (Index i = 0; i < r.rows(); ++i) {
            const Scalar mx = row_max[r.row_begin + i];
            Scalar sum = 0;
            for (Index j = 0; j < r.cols(); ++j) {
                if (!act(i, j)) continue;
                sum += std::exp(blk(i, j) + v[r.col_begin + j] - mx);
            }
            acc[r.row_begin + i] += sum;
        }
    }
    Vector<Scalar> u = Vector<Scalar>::Zero(n);
    for (Index i = 0; i < n; ++i) {
        if (!m.row_active(i)) continue;
        if (!(acc[i] > Scalar(0)) || !std::isfinite(row_max[i])) {
            throw InfeasibleSupport("active row " + std::to_string(i) + " has empty reduction");
        }
        u[i] = -(row_max[i] + std::log(acc[i]));
    }
    return u;
}

// Transpose analogue of row_half_step.
template <class Scalar>
Vector<Scalar> col_half_step(const ScoreField<Scalar>& S, const Vector<Scalar>& u) {
    const TileSchedule& sched = S.sched();
    const SupportMask& m = sched.support();
    const Index n = m.n_cols();
    constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

    Vector<Scalar> col_max = Vector<Scalar>::Constant(n, kNegInf);
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar>& blk = S.values.blocks[t];
        const BoolArray& act = sched.tile_activity(t);
        for (Index i = 0; i < r.rows(); ++i) {
            const Scalar ui = u[r.row_begin + i];
            for (Index j = 0; j < r.cols(); ++j) {
                if (!act(i, j)) continue;
                const Scalar x = blk(i, j) + ui;
                if (x > col_max[r.col_begin + j]) col_max[r.col_begin + j] = x;
            }
        }
    }
    Vector<Scalar> acc = Vector<Scalar>::Zero(n);
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar>& blk = S.values.blocks[t];
        const BoolArray& act = sched.tile_activity(t);
        for (Index i = 0; i < r.rows(); ++i) {
            const Scalar ui = u[r.row_begin + i];
            for (Index j = 0; j < r.cols(); ++j) {
                if (!act(i, j)) continue;
                acc[r.col_begin + j] += std::exp(blk(i, j) + ui - col_max[r.col_begin + j]);
            }
        }
    }
    Vector<Scalar> v = Vector<Scalar>::Zero(n);
    for (Index j = 0; j < n; ++j) {
        if (!m.col_active(j)) continue;
        if (!(acc[j] > Scalar(0)) || !std::isfinite(col_max[j])) {
            throw InfeasibleSupport("active column " + std::to_string(j) + " has empty reduction");
        }
        v[j] = -(col_max[j] + std::log(acc[j]));
    }
    return v;
}

template <class Scalar>
struct CenterResult {
    Vector<Scalar> u;
    Vector<Scalar> v;
    Scalar shift;
};

// Centered representative: subtract the mean of u over valid queries, add it
// to v. Same-time sums u_i + v_j are preserved.
template <class Scalar>
CenterResult<Scalar> center(const Vector<Scalar>& u, const Vector<Scalar>& v,
                            const std::vector<bool>& valid_query) {
    Scalar sum = 0;
    Index count = 0;
    for (Index i = 0; i < u.size(); ++i) {
        if (valid_query[static_cast<size_t>(i)]) {
            sum += u[i];
            ++count;
        }
    }
    if (count == 0) throw InfeasibleSupport("centering requires at least one valid query");
    const Scalar c = sum / static_cast<Scalar>(count);
    CenterResult<Scalar> out;
    out.u = u;
    out.v = v;
    out.shift = c;
    for (Index i = 0; i < u.size(); ++i) {
        if (valid_query[static_cast<size_t>(i)]) out.u[i] -= c;
    }
    for (Index j = 0; j < v.size(); ++j) out.v[j] += c;
    return out;
}

namespace detail {

// One full step (u half-step, v half-step, optional centering) appended to a
// trace whose last entry is the current pair.
template <class Scalar>
void advance_full_step(const ScoreField<Scalar>& S, DualTrace<Scalar>& trace, int stage_id) {
    const SupportMask& m = S.support();
    const Vector<Scalar>& v_prev = trace.v_hist.back();
    Vector<Scalar> u_next = row_half_step(S, v_prev);
    Vector<Scalar> v_next = col_half_step(S, u_next);
    Scalar shift = 0;
    if (trace.centered) {
        CenterResult<Scalar> c = center(u_next, v_next, m.row_mask());
        u_next = std::move(c.u);
        v_next = std::move(c.v);
        shift = c.shift;
    }
    trace.u_hist.push_back(std::move(u_next));
    trace.v_hist.push_back(std::move(v_next));
    if (trace.centered) trace.gauge_hist.push_back(trace.gauge_hist.back() + shift);
    trace.eps_hist.push_back(S.epsilon);
    trace.stage_hist.push_back(stage_id);
}

}  // namespace detail

// T stopped half-step pairs from the cold start u = v = 0, centering after
// each full step, stage temperatures from the continuation schedule. The
// final pair is the stop-gradient state the tail restarts from.
template <class Scalar>
DualTrace<Scalar> stopped_base_solve(const ScoreField<Scalar>& raw, Index base_depth,
                                     const EpsSchedule<Scalar>& schedule, bool centered = true) {
    if (!raw.raw) throw std::invalid_argument("stopped_base_solve expects raw (unscaled) scores");
    schedule.validate(base_depth);
    const SupportMask& m = raw.support();

    DualTrace<Scalar> trace;
    trace.centered = centered;
    trace.u_hist.push_back(Vector<Scalar>::Zero(m.n_rows()));
    trace.v_hist.push_back(Vector<Scalar>::Zero(m.n_cols()));
    if (centered) trace.gauge_hist.push_back(Scalar(0));
    trace.eps_hist.push_back(Scalar(0));
    trace.stage_hist.push_back(-1);

    int stage_id = 0;
    for (const auto& stage : schedule.stages) {
        if (stage.iterations > 0) {
            const ScoreField<Scalar> S = scale_to_temperature(raw, stage.epsilon);
            for (Index k = 0; k < stage.iterations; ++k) {
                detail::advance_full_step(S, trace, stage_id);
            }
        }
        ++stage_id;
    }
    trace.split = trace.steps();
    return trace;
}

// R differentiable refinement steps recomputed from the stopped pair, always
// at the schedule's final temperature.
template <class Scalar>
void tail_refine(const ScoreField<Scalar>& raw, DualTrace<Scalar>& trace, Index tail_depth,
                 Scalar final_epsilon) {
    if (!raw.raw) throw std::invalid_argument("tail_refine expects raw (unscaled) scores");
    if (tail_depth < 0) throw std::invalid_argument("tail depth must be >= 0");
    if (trace.steps() != trace.split) {
        throw std::invalid_argument("trace already has a tail");
    }
    // The tail shares the last base stage's orbit only at the same
    // temperature; a different epsilon opens a new stage.
    int tail_stage = 0;
    if (trace.split > 0) {
        tail_stage = trace.stage_at(trace.split);
        if (trace.eps_at(trace.split) != final_epsilon) ++tail_stage;
    }
    if (tail_depth > 0) {
        const ScoreField<Scalar> S = scale_to_temperature(raw, final_epsilon);
        for (Index r = 0; r < tail_depth; ++r) detail::advance_full_step(S, trace, tail_stage);
    }
}

// P_ij = exp(S_ij + u_i + v_j + log_gauge) on a tile, zero off support.
// log_gauge carries e^{c_a - c_b} when reconstructing ungauged mixed-time
// plans from centered representatives; it is zero for same-time plans.
template <class Scalar>
Matrix<Scalar> plan_tile(const ScoreField<Scalar>& S, size_t tile, const Vector<Scalar>& u,
                         const Vector<Scalar>& v, Scalar log_gauge = Scalar(0)) {
    const TileRange& r = S.sched().tiles()[tile];
    const BoolArray& act = S.sched().tile_activity(tile);
    const Matrix<Scalar>& blk = S.values.blocks[tile];
    Matrix<Scalar> p(r.rows(), r.cols());
    for (Index i = 0; i < r.rows(); ++i) {
        const Scalar ui = u[r.row_begin + i] + log_gauge;
        for (Index j = 0; j < r.cols(); ++j) {
            p(i, j) = act(i, j) ? std::exp(blk(i, j) + ui + v[r.col_begin + j]) : Scalar(0);
        }
    }
    return p;
}

// Staircase plan for trace steps (h_u, h_v), reconstructed gauge-consistently
// when the trace stores centered representatives.
template <class Scalar>
BlockField<Scalar> staircase_plan(const ScoreField<Scalar>& S, const DualTrace<Scalar>& trace,
                                  Index h_u, Index h_v) {
    const Scalar lg = trace.gauge(h_u) - trace.gauge(h_v);
    BlockField<Scalar> out;
    out.schedule = S.values.schedule;
    out.blocks.reserve(S.sched().tile_count());
    for (size_t t = 0; t < S.sched().tile_count(); ++t) {
        out.blocks.push_back(plan_tile(S, t, trace.u(h_u), trace.v(h_v), lg));
    }
    return out;
}

template <class Scalar>
struct TransportOutput {
    Matrix<Scalar> O;
};

// O_i = sum_j P_ij(u, v) V_j over active edges; no row renormalization.
template <class Scalar>
TransportOutput<Scalar> apply_transport(const ScoreField<Scalar>& S, const Vector<Scalar>& u,
                                        const Vector<Scalar>& v, const Matrix<Scalar>& V) {
    const TileSchedule& sched = S.sched();
    if (V.rows() != S.support().n_cols()) throw std::invalid_argument("V row count mismatch");
    TransportOutput<Scalar> out;
    out.O = Matrix<Scalar>::Zero(S.support().n_rows(), V.cols());
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar> p = plan_tile(S, t, u, v);
        out.O.middleRows(r.row_begin, r.rows()).noalias() +=
            p * V.middleRows(r.col_begin, r.cols());
    }
    return out;
}

// Convenience bundle for the validation drivers.
template <class Scalar>
struct SurrogateRun {
    DualTrace<Scalar> trace;
    ScoreField<Scalar> raw;     // S_bar = QK^T/sqrt(d)
    ScoreField<Scalar> scaled;  // at the final temperature
    Matrix<Scalar> output;
};

template <class Scalar>
SurrogateRun<Scalar> run_surrogate(const Matrix<Scalar>& Q, const Matrix<Scalar>& K,
                                   const Matrix<Scalar>& V,
                                   std::shared_ptr<const TileSchedule> schedule, Index base_depth,
                                   Index tail_depth, const EpsSchedule<Scalar>& eps,
                                   bool centered = true) {
    SurrogateRun<Scalar> run;
    run.raw = raw_scores(Q, K, schedule);
    run.trace = stopped_base_solve(run.raw, base_depth, eps, centered);
    tail_refine(run.raw, run.trace, tail_depth, eps.final_epsilon());
    run.scaled = scale_to_temperature(run.raw, eps.final_epsilon());
    const Index h = run.trace.steps();
    run.output = apply_transport(run.scaled, run.trace.u(h), run.trace.v(h), V).O;
    return run;
}

}  // namespace sinktail
