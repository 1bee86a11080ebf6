#pragma once

#include <vector>

#include "sinktail/sinkhorn.hpp"

namespace sinktail {

// Cotangent of the stopped base pair: the quantity the stop-gradient rule
// discards and the bias certificate measures.
template <class Scalar>
struct BaseCotangent {
    Vector<Scalar> u;
    Vector<Scalar> v;

    Scalar l2_norm() const { return std::sqrt(u.squaredNorm() + v.squaredNorm()); }
};

template <class Scalar>
struct CotangentSet {
    BlockField<Scalar> score_bar;  // w.r.t. the tail-temperature scores
    Matrix<Scalar> grad_q;
    Matrix<Scalar> grad_k;
    Matrix<Scalar> grad_v;
    std::vector<Vector<Scalar>> u_bar;  // tail boundary cotangents, r = 0..R
    std::vector<Vector<Scalar>> v_bar;
    BaseCotangent<Scalar> base_cotangent;
};

// Row/column modifiers that rebuild every R=2 staircase factor from the
// reference plan. Built from centered representatives, so the scalar gauge
// factors of the ledger are carried alongside.
template <class Scalar>
struct ModifierVectors {
    Vector<Scalar> u_step_ratio;  // exp(u_tail1 - u_tail2)
    Vector<Scalar> v_step_ratio;  // exp(v_tail1 - v_tail2)
    Vector<Scalar> v_base_ratio;  // exp(v_stop - v_tail2)
    Scalar gauge_21 = Scalar(1);  // e^{c2 - c1}
    Scalar gauge_10 = Scalar(1);  // e^{c1 - c0}

    static ModifierVectors from_trace(const DualTrace<Scalar>& trace) {
        if (trace.tail_depth() != 2) throw UnsupportedDepth("modifier vectors need a depth-2 tail");
        ModifierVectors m;
        m.u_step_ratio = (trace.tail_u(1) - trace.tail_u(2)).array().exp().matrix();
        m.v_step_ratio = (trace.tail_v(1) - trace.tail_v(2)).array().exp().matrix();
        m.v_base_ratio = (trace.tail_v(0) - trace.tail_v(2)).array().exp().matrix();
        m.gauge_21 = std::exp(trace.tail_gauge(2) - trace.tail_gauge(1));
        m.gauge_10 = std::exp(trace.tail_gauge(1) - trace.tail_gauge(0));
        return m;
    }
};

enum class BackwardMode { OneReference, DirectFourPlan };

namespace detail {

// y += P^(h_u,h_v) x, streamed over tiles with ungauged plan reconstruction.
template <class Scalar>
void plan_apply(const ScoreField<Scalar>& S, const DualTrace<Scalar>& trace, Index h_u, Index h_v,
                const Vector<Scalar>& x, Vector<Scalar>& y) {
    const Scalar lg = trace.gauge(h_u) - trace.gauge(h_v);
    const TileSchedule& sched = S.sched();
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar> p = plan_tile(S, t, trace.u(h_u), trace.v(h_v), lg);
        y.segment(r.row_begin, r.rows()).noalias() += p * x.segment(r.col_begin, r.cols());
    }
}

// y += (P^(h_u,h_v))^T x.
template <class Scalar>
void plan_apply_transpose(const ScoreField<Scalar>& S, const DualTrace<Scalar>& trace, Index h_u,
                          Index h_v, const Vector<Scalar>& x, Vector<Scalar>& y) {
    const Scalar lg = trace.gauge(h_u) - trace.gauge(h_v);
    const TileSchedule& sched = S.sched();
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar> p = plan_tile(S, t, trace.u(h_u), trace.v(h_v), lg);
        y.segment(r.col_begin, r.cols()).noalias() +=
            p.transpose() * x.segment(r.row_begin, r.rows());
    }
}

// score_bar -= weight * [P^(h_u,h_v) ⊙ (1 col^T) + P^(h_u,h_v) ⊙ (row 1^T)],
// either side optional. The weight carries the per-stage 1/epsilon factor
// when accumulating into a raw-score cotangent.
template <class Scalar>
void subtract_plan_outer(const ScoreField<Scalar>& S, const DualTrace<Scalar>& trace, Index h_u,
                         Index h_v, const Vector<Scalar>* row, const Vector<Scalar>* col,
                         BlockField<Scalar>& score_bar, Scalar weight = Scalar(1)) {
    const Scalar lg = trace.gauge(h_u) - trace.gauge(h_v);
    const TileSchedule& sched = S.sched();
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        Matrix<Scalar> p = plan_tile(S, t, trace.u(h_u), trace.v(h_v), lg);
        if (weight != Scalar(1)) p *= weight;
        Matrix<Scalar>& out = score_bar.blocks[t];
        if (col != nullptr) {
            out.noalias() -= p * col->segment(r.col_begin, r.cols()).asDiagonal();
        }
        if (row != nullptr) {
            out.noalias() -= row->segment(r.row_begin, r.rows()).asDiagonal() * p;
        }
    }
}

}  // namespace detail

// grad_Q_i = sum_j score_bar_ij K_j / (sqrt(d) eps); grad_K symmetric.
template <class Scalar>
void backprop_scores_to_qkv(const BlockField<Scalar>& score_bar, const Matrix<Scalar>& Q,
                            const Matrix<Scalar>& K, Scalar epsilon, Matrix<Scalar>& grad_q,
                            Matrix<Scalar>& grad_k) {
    const TileSchedule& sched = *score_bar.schedule;
    const Scalar inv = Scalar(1) / (std::sqrt(static_cast<Scalar>(Q.cols())) * epsilon);
    grad_q = Matrix<Scalar>::Zero(Q.rows(), Q.cols());
    grad_k = Matrix<Scalar>::Zero(K.rows(), K.cols());
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar>& blk = score_bar.blocks[t];
        grad_q.middleRows(r.row_begin, r.rows()).noalias() +=
            inv * (blk * K.middleRows(r.col_begin, r.cols()));
        grad_k.middleRows(r.col_begin, r.cols()).noalias() +=
            inv * (blk.transpose() * Q.middleRows(r.row_begin, r.rows()));
    }
}

// Exact reverse pass of the fixed-depth tail surrogate for any R. `S` is the
// score field at the tail temperature. Mixed-time plans are reconstructed
// gauge-consistently from the centered ledger.
template <class Scalar>
CotangentSet<Scalar> tail_adjoint_generic(const ScoreField<Scalar>& S,
                                          const DualTrace<Scalar>& trace, const Matrix<Scalar>& G,
                                          const Matrix<Scalar>& Q, const Matrix<Scalar>& K,
                                          const Matrix<Scalar>& V) {
    const TileSchedule& sched = S.sched();
    const SupportMask& m = sched.support();
    const Index R = trace.tail_depth();
    const Index hR = trace.steps();

    CotangentSet<Scalar> out;
    out.score_bar = BlockField<Scalar>(S.values.schedule);
    out.grad_v = Matrix<Scalar>::Zero(V.rows(), V.cols());
    out.u_bar.assign(static_cast<size_t>(R) + 1, Vector<Scalar>::Zero(m.n_rows()));
    out.v_bar.assign(static_cast<size_t>(R) + 1, Vector<Scalar>::Zero(m.n_cols()));

    // Terminal transport application: score term P^(R,R) ⊙ Z plus the direct
    // dual cotangents g_u, g_v and the value gradient.
    Vector<Scalar> g_u = Vector<Scalar>::Zero(m.n_rows());
    Vector<Scalar> g_v = Vector<Scalar>::Zero(m.n_cols());
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        const TileRange& r = sched.tiles()[t];
        const Matrix<Scalar> p = plan_tile(S, t, trace.u(hR), trace.v(hR));
        const Matrix<Scalar> z = G.middleRows(r.row_begin, r.rows()) *
                                 V.middleRows(r.col_begin, r.cols()).transpose();
        const Matrix<Scalar> w = p.cwiseProduct(z);
        out.score_bar.blocks[t] += w;
        g_u.segment(r.row_begin, r.rows()) += w.rowwise().sum();
        g_v.segment(r.col_begin, r.cols()) += w.colwise().sum().transpose();
        out.grad_v.middleRows(r.col_begin, r.cols()).noalias() +=
            p.transpose() * G.middleRows(r.row_begin, r.rows());
    }

    if (R == 0) {
        out.u_bar[0] = g_u;
        out.v_bar[0] = g_v;
        out.base_cotangent = {g_u, g_v};
        backprop_scores_to_qkv(out.score_bar, Q, K, S.epsilon, out.grad_q, out.grad_k);
        return out;
    }

    out.v_bar[static_cast<size_t>(R)] = g_v;
    Vector<Scalar> pv = Vector<Scalar>::Zero(m.n_rows());
    detail::plan_apply(S, trace, hR, hR, out.v_bar[static_cast<size_t>(R)], pv);
    out.u_bar[static_cast<size_t>(R)] = g_u - pv;

    for (Index t = R; t >= 1; --t) {
        const Index h = trace.tail_step(t);
        const Vector<Scalar>& ub = out.u_bar[static_cast<size_t>(t)];
        const Vector<Scalar>& vb = out.v_bar[static_cast<size_t>(t)];
        detail::subtract_plan_outer<Scalar>(S, trace, h, h, nullptr, &vb, out.score_bar);
        detail::subtract_plan_outer<Scalar>(S, trace, h, h - 1, &ub, nullptr, out.score_bar);

        Vector<Scalar> vprev = Vector<Scalar>::Zero(m.n_cols());
        detail::plan_apply_transpose(S, trace, h, h - 1, ub, vprev);
        out.v_bar[static_cast<size_t>(t) - 1] = -vprev;

        if (t >= 2) {
            Vector<Scalar> unext = Vector<Scalar>::Zero(m.n_rows());
            detail::plan_apply(S, trace, h - 1, h - 1, out.v_bar[static_cast<size_t>(t) - 1], unext);
            out.u_bar[static_cast<size_t>(t) - 1] = -unext;
        }
    }
    // The recurrence stops at the stop-gradient boundary: the tail never reads
    // the stopped u, so its cotangent is zero.
    out.u_bar[0] = Vector<Scalar>::Zero(m.n_rows());
    out.base_cotangent = {out.u_bar[0], out.v_bar[0]};
    backprop_scores_to_qkv(out.score_bar, Q, K, S.epsilon, out.grad_q, out.grad_k);
    return out;
}

// One-reference-tile score cotangent:
//   Sbar_ij = P22_ij (Z_ij - v2b_j - g21 beta_j u2b_i - alpha_i beta_j v1b_j
//                     - g10 alpha_i delta_j u1b_i)
// exactly equal to the expanded four-plan form on the tile.
template <class Scalar>
Matrix<Scalar> r2_score_cotangent_tile(
    const Matrix<Scalar>& p22, const Matrix<Scalar>& z, const Vector<Scalar>& u2_bar,
    const Vector<Scalar>& v2_bar, const Vector<Scalar>& u1_bar, const Vector<Scalar>& v1_bar,
    const Vector<Scalar>& u_step_ratio, const Vector<Scalar>& v_step_ratio,
    const Vector<Scalar>& v_base_ratio, Scalar gauge_21, Scalar gauge_10) {
    const Index rows = p22.rows();
    const Index cols = p22.cols();
    Matrix<Scalar> out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Scalar a = u_step_ratio[i];
        const Scalar u2 = u2_bar[i];
        const Scalar au1 = gauge_10 * a * u1_bar[i];
        for (Index j = 0; j < cols; ++j) {
            const Scalar mod = z(i, j) - v2_bar[j] - gauge_21 * v_step_ratio[j] * u2 -
                               a * v_step_ratio[j] * v1_bar[j] - au1 * v_base_ratio[j];
            out(i, j) = p22(i, j) * mod;
        }
    }
    return out;
}

// Full R=2 backward. OneReference streams one resident reference plan tile per
// block; DirectFourPlan materializes all four staircase factors and follows
// the expanded form. Both produce identical results up to accumulation
// rounding.
template <class Scalar>
CotangentSet<Scalar> r2_backward(const ScoreField<Scalar>& S, const DualTrace<Scalar>& trace,
                                 const Matrix<Scalar>& G, const Matrix<Scalar>& Q,
                                 const Matrix<Scalar>& K, const Matrix<Scalar>& V,
                                 BackwardMode mode = BackwardMode::OneReference) {
    if (trace.tail_depth() != 2) {
        throw UnsupportedDepth("r2_backward requires a tail of depth 2");
    }
    const TileSchedule& sched = S.sched();
    const SupportMask& m = sched.support();
    const Index h0 = trace.tail_step(0);
    const Index h1 = trace.tail_step(1);
    const Index h2 = trace.tail_step(2);
    const Scalar inv_qk = Scalar(1) / (std::sqrt(static_cast<Scalar>(Q.cols())) * S.epsilon);

    CotangentSet<Scalar> out;
    out.score_bar = BlockField<Scalar>(S.values.schedule);
    out.grad_q = Matrix<Scalar>::Zero(Q.rows(), Q.cols());
    out.grad_k = Matrix<Scalar>::Zero(K.rows(), K.cols());
    out.grad_v = Matrix<Scalar>::Zero(V.rows(), V.cols());
    out.u_bar.assign(3, Vector<Scalar>::Zero(m.n_rows()));
    out.v_bar.assign(3, Vector<Scalar>::Zero(m.n_cols()));

    if (mode == BackwardMode::OneReference) {
        const ModifierVectors<Scalar> mv = ModifierVectors<Scalar>::from_trace(trace);

        Vector<Scalar> g_u = Vector<Scalar>::Zero(m.n_rows());
        Vector<Scalar> g_v = Vector<Scalar>::Zero(m.n_cols());
        for (size_t t = 0; t < sched.tile_count(); ++t) {
            const TileRange& r = sched.tiles()[t];
            const Matrix<Scalar> p22 = plan_tile(S, t, trace.u(h2), trace.v(h2));
            const Matrix<Scalar> z = G.middleRows(r.row_begin, r.rows()) *
                                     V.middleRows(r.col_begin, r.cols()).transpose();
            const Matrix<Scalar> w = p22.cwiseProduct(z);
            g_u.segment(r.row_begin, r.rows()) += w.rowwise().sum();
            g_v.segment(r.col_begin, r.cols()) += w.colwise().sum().transpose();
            out.grad_v.middleRows(r.col_begin, r.cols()).noalias() +=
                p22.transpose() * G.middleRows(r.row_begin, r.rows());
        }

        out.v_bar[2] = g_v;
        Vector<Scalar> pv = Vector<Scalar>::Zero(m.n_rows());
        detail::plan_apply(S, trace, h2, h2, out.v_bar[2], pv);
        out.u_bar[2] = g_u - pv;

        // Remaining recurrences as reference-plan products with row/column
        // modifiers; the mixed factors are never formed.
        Vector<Scalar> tmp_v = Vector<Scalar>::Zero(m.n_cols());
        detail::plan_apply_transpose(S, trace, h2, h2, out.u_bar[2], tmp_v);
        out.v_bar[1] = -mv.gauge_21 * mv.v_step_ratio.cwiseProduct(tmp_v);

        Vector<Scalar> tmp_u = Vector<Scalar>::Zero(m.n_rows());
        const Vector<Scalar> bv1 = mv.v_step_ratio.cwiseProduct(out.v_bar[1]);
        detail::plan_apply(S, trace, h2, h2, bv1, tmp_u);
        out.u_bar[1] = -mv.u_step_ratio.cwiseProduct(tmp_u);

        tmp_v.setZero();
        const Vector<Scalar> au1 = mv.u_step_ratio.cwiseProduct(out.u_bar[1]);
        detail::plan_apply_transpose(S, trace, h2, h2, au1, tmp_v);
        out.v_bar[0] = -mv.gauge_10 * mv.v_base_ratio.cwiseProduct(tmp_v);

        for (size_t t = 0; t < sched.tile_count(); ++t) {
            const TileRange& r = sched.tiles()[t];
            const Matrix<Scalar> p22 = plan_tile(S, t, trace.u(h2), trace.v(h2));
            const Matrix<Scalar> z = G.middleRows(r.row_begin, r.rows()) *
                                     V.middleRows(r.col_begin, r.cols()).transpose();
            const Index rb = r.row_begin;
            const Index cb = r.col_begin;
            Matrix<Scalar> sb = r2_score_cotangent_tile<Scalar>(
                p22, z, out.u_bar[2].segment(rb, r.rows()), out.v_bar[2].segment(cb, r.cols()),
                out.u_bar[1].segment(rb, r.rows()), out.v_bar[1].segment(cb, r.cols()),
                mv.u_step_ratio.segment(rb, r.rows()), mv.v_step_ratio.segment(cb, r.cols()),
                mv.v_base_ratio.segment(cb, r.cols()), mv.gauge_21, mv.gauge_10);
            out.grad_q.middleRows(rb, r.rows()).noalias() +=
                inv_qk * (sb * K.middleRows(cb, r.cols()));
            out.grad_k.middleRows(cb, r.cols()).noalias() +=
                inv_qk * (sb.transpose() * Q.middleRows(rb, r.rows()));
            out.score_bar.blocks[t] = std::move(sb);
        }
    } else {
        // Direct route: each staircase factor is exponentiated from its own
        // dual pair, with ledger gauge factors on the mixed-time plans.
        Vector<Scalar> g_u = Vector<Scalar>::Zero(m.n_rows());
        Vector<Scalar> g_v = Vector<Scalar>::Zero(m.n_cols());
        for (size_t t = 0; t < sched.tile_count(); ++t) {
            const TileRange& r = sched.tiles()[t];
            const Matrix<Scalar> p22 = plan_tile(S, t, trace.u(h2), trace.v(h2));
            const Matrix<Scalar> z = G.middleRows(r.row_begin, r.rows()) *
                                     V.middleRows(r.col_begin, r.cols()).transpose();
            const Matrix<Scalar> w = p22.cwiseProduct(z);
            g_u.segment(r.row_begin, r.rows()) += w.rowwise().sum();
            g_v.segment(r.col_begin, r.cols()) += w.colwise().sum().transpose();
            out.grad_v.middleRows(r.col_begin, r.cols()).noalias() +=
                p22.transpose() * G.middleRows(r.row_begin, r.rows());
        }

        out.v_bar[2] = g_v;
        Vector<Scalar> pv = Vector<Scalar>::Zero(m.n_rows());
        detail::plan_apply(S, trace, h2, h2, out.v_bar[2], pv);
        out.u_bar[2] = g_u - pv;

        Vector<Scalar> tmp_v = Vector<Scalar>::Zero(m.n_cols());
        detail::plan_apply_transpose(S, trace, h2, h1, out.u_bar[2], tmp_v);
        out.v_bar[1] = -tmp_v;

        Vector<Scalar> tmp_u = Vector<Scalar>::Zero(m.n_rows());
        detail::plan_apply(S, trace, h1, h1, out.v_bar[1], tmp_u);
        out.u_bar[1] = -tmp_u;

        tmp_v.setZero();
        detail::plan_apply_transpose(S, trace, h1, h0, out.u_bar[1], tmp_v);
        out.v_bar[0] = -tmp_v;

        for (size_t t = 0; t < sched.tile_count(); ++t) {
            const TileRange& r = sched.tiles()[t];
            const Index rb = r.row_begin;
            const Index cb = r.col_begin;
            const Matrix<Scalar> p22 = plan_tile(S, t, trace.u(h2), trace.v(h2));
            const Matrix<Scalar> p21 =
                plan_tile(S, t, trace.u(h2), trace.v(h1), trace.gauge(h2) - trace.gauge(h1));
            const Matrix<Scalar> p11 = plan_tile(S, t, trace.u(h1), trace.v(h1));
            const Matrix<Scalar> p10 =
                plan_tile(S, t, trace.u(h1), trace.v(h0), trace.gauge(h1) - trace.gauge(h0));
            const Matrix<Scalar> z = G.middleRows(rb, r.rows()) *
                                     V.middleRows(cb, r.cols()).transpose();
            Matrix<Scalar> sb = p22.cwiseProduct(z);
            sb.noalias() -= p22 * out.v_bar[2].segment(cb, r.cols()).asDiagonal();
            sb.noalias() -= out.u_bar[2].segment(rb, r.rows()).asDiagonal() * p21;
            sb.noalias() -= p11 * out.v_bar[1].segment(cb, r.cols()).asDiagonal();
            sb.noalias() -= out.u_bar[1].segment(rb, r.rows()).asDiagonal() * p10;
            out.grad_q.middleRows(rb, r.rows()).noalias() +=
                inv_qk * (sb * K.middleRows(cb, r.cols()));
            out.grad_k.middleRows(cb, r.cols()).noalias() +=
                inv_qk * (sb.transpose() * Q.middleRows(rb, r.rows()));
            out.score_bar.blocks[t] = std::move(sb);
        }
    }

    out.u_bar[0] = Vector<Scalar>::Zero(m.n_rows());
    out.base_cotangent = {out.u_bar[0], out.v_bar[0]};
    return out;
}

}  // namespace sinktail
