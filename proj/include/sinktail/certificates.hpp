#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "sinktail/adjoint.hpp"
#include "sinktail/loss.hpp"
#include "sinktail/oracle.hpp"

namespace sinktail {

template <class Scalar>
struct BaseVjpResult {
    Matrix<Scalar> grad_q;
    Matrix<Scalar> grad_k;
};

// Pulls a base-state cotangent back through the stopped base solve to (Q, K):
// the same reverse recurrences as the tail adjoint, extended through all T
// base steps, with per-stage temperature folded into the raw-score cotangent.
template <class Scalar>
BaseVjpResult<Scalar> base_solve_vjp(const ScoreField<Scalar>& raw, const DualTrace<Scalar>& trace,
                                     const BaseCotangent<Scalar>& eta, const Matrix<Scalar>& Q,
                                     const Matrix<Scalar>& K) {
    if (!raw.raw) throw std::invalid_argument("base_solve_vjp expects raw (unscaled) scores");
    if (static_cast<Index>(trace.u_hist.size()) <= trace.split) {
        throw MissingBaseTrace("trace does not retain all base duals");
    }
    const SupportMask& m = raw.support();
    if (eta.u.size() != m.n_rows() || eta.v.size() != m.n_cols()) {
        throw std::invalid_argument("base-state cotangent sized to the wrong support");
    }

    BaseVjpResult<Scalar> out;
    out.grad_q = Matrix<Scalar>::Zero(Q.rows(), Q.cols());
    out.grad_k = Matrix<Scalar>::Zero(K.rows(), K.cols());
    if (trace.split == 0) return out;  // z_0 is independent of the parameters

    BlockField<Scalar> raw_bar(raw.values.schedule);
    Vector<Scalar> u_bar = eta.u;
    Vector<Scalar> v_bar = eta.v;

    int current_stage = trace.stage_at(trace.split);
    ScoreField<Scalar> S_h = scale_to_temperature(raw, trace.eps_at(trace.split));
    for (Index h = trace.split; h >= 1; --h) {
        if (trace.stage_at(h) != current_stage) {
            current_stage = trace.stage_at(h);
            S_h = scale_to_temperature(raw, trace.eps_at(h));
        }
        const Scalar inv_eps = Scalar(1) / trace.eps_at(h);

        Vector<Scalar> pv = Vector<Scalar>::Zero(m.n_rows());
        detail::plan_apply(S_h, trace, h, h, v_bar, pv);
        Vector<Scalar> a_bar = u_bar - pv;
        detail::subtract_plan_outer<Scalar>(S_h, trace, h, h, nullptr, &v_bar, raw_bar, inv_eps);

        Vector<Scalar> v_prev = Vector<Scalar>::Zero(m.n_cols());
        detail::plan_apply_transpose(S_h, trace, h, h - 1, a_bar, v_prev);
        detail::subtract_plan_outer<Scalar>(S_h, trace, h, h - 1, &a_bar, nullptr, raw_bar, inv_eps);

        v_bar = -v_prev;
        u_bar.setZero();
    }

    backprop_scores_to_qkv(raw_bar, Q, K, Scalar(1), out.grad_q, out.grad_k);
    return out;
}

struct BiasCertificate {
    Index tail_depth = 0;
    double eta_norm = 0.0;      // ||eta_R||_2
    double c_inf = 0.0;         // max-abs of the omitted gradient over (Q, K)
    double c_l2 = 0.0;
    MatrixF64 c_q, c_k;
    double max_gap = std::numeric_limits<double>::quiet_NaN();   // max|(full - stopped)|
    double residual = std::numeric_limits<double>::quiet_NaN();  // max|gap - c_R|
    bool residual_computed = false;
};

struct CertificateProblem {
    MatrixF64 Q, K, V;
    std::shared_ptr<const TileSchedule> schedule;
    Index base_depth = 0;
    EpsSchedule<double> eps;
    LossSpec<double> loss;
};

inline oracle::DenseProblem to_dense_problem(const CertificateProblem& p, Index tail_depth) {
    const SupportMask& m = p.schedule->support();
    oracle::DenseProblem d;
    d.Q = p.Q;
    d.K = p.K;
    d.V = p.V;
    d.support = BoolArray::Constant(m.n_rows(), m.n_cols(), false);
    for (Index i = 0; i < m.n_rows(); ++i) {
        m.for_each_in_row(i, [&](Index j) { d.support(i, j) = true; });
    }
    d.epsilon = p.eps.final_epsilon();
    d.base_depth = p.base_depth;
    d.tail_depth = tail_depth;
    d.schedule = p.eps;
    d.loss = p.loss;
    return d;
}

// Measures eta_R with the tail adjoint, pulls it back through the base solve,
// and (when the dense oracle is feasible) checks the exact remainder identity
// (full - stopped) = c_R against full BPTT.
inline BiasCertificate bias_certificate(const CertificateProblem& p, Index tail_depth,
                                        bool want_residual = true) {
    SurrogateRun<double> run = run_surrogate(p.Q, p.K, p.V, p.schedule, p.base_depth, tail_depth,
                                             p.eps);
    const auto row_valid = p.schedule->support().row_mask();
    const MatrixF64 G = p.loss.output_cotangent(run.output, p.V, row_valid);
    const CotangentSet<double> adj = tail_adjoint_generic(run.scaled, run.trace, G, p.Q, p.K, p.V);
    const BaseVjpResult<double> c = base_solve_vjp(run.raw, run.trace, adj.base_cotangent, p.Q, p.K);

    BiasCertificate cert;
    cert.tail_depth = tail_depth;
    cert.eta_norm = adj.base_cotangent.l2_norm();
    cert.c_q = c.grad_q;
    cert.c_k = c.grad_k;
    cert.c_inf = std::max(c.grad_q.cwiseAbs().maxCoeff(), c.grad_k.cwiseAbs().maxCoeff());
    cert.c_l2 = std::sqrt(c.grad_q.squaredNorm() + c.grad_k.squaredNorm());

    const SupportMask& m = p.schedule->support();
    if (want_residual && m.n_rows() <= oracle::kBpttCap && m.n_cols() <= oracle::kBpttCap) {
        const oracle::DenseGradients full = oracle::full_bptt_grad(to_dense_problem(p, tail_depth));
        const MatrixF64 gap_q = full.grad_q - adj.grad_q;
        const MatrixF64 gap_k = full.grad_k - adj.grad_k;
        cert.max_gap = std::max(gap_q.cwiseAbs().maxCoeff(), gap_k.cwiseAbs().maxCoeff());
        cert.residual = std::max((gap_q - c.grad_q).cwiseAbs().maxCoeff(),
                                 (gap_k - c.grad_k).cwiseAbs().maxCoeff());
        cert.residual_computed = true;
    }
    return cert;
}

struct TailDepthSelection {
    Index selected = -1;  // -1: no depth satisfies the tolerance
    bool used_sufficient_bound = false;
    std::vector<BiasCertificate> trail;
};

// Smallest R <= R_max whose certified omitted gradient is below tau. With an
// operator-norm bound the sufficient test C_T * ||eta_R|| <= tau is used
// instead. The cost function must be nondecreasing, which makes the first
// feasible depth the min-cost certified choice.
inline TailDepthSelection select_tail_depth(
    const CertificateProblem& p, double tau, Index r_max,
    const std::function<double(Index)>& cost = [](Index r) { return static_cast<double>(r); },
    std::optional<double> operator_norm_bound = std::nullopt) {
    if (!(tau > 0)) throw std::invalid_argument("tolerance must be > 0");
    if (r_max < 0) throw std::invalid_argument("R_max must be >= 0");
    double prev_cost = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r <= r_max; ++r) {
        const double cr = cost(r);
        if (cr < prev_cost) throw std::invalid_argument("cost function must be nondecreasing");
        prev_cost = cr;
    }

    TailDepthSelection sel;
    sel.used_sufficient_bound = operator_norm_bound.has_value();
    for (Index r = 0; r <= r_max; ++r) {
        BiasCertificate cert = bias_certificate(p, r, /*want_residual=*/false);
        const bool feasible = operator_norm_bound.has_value()
                                  ? (*operator_norm_bound * cert.eta_norm <= tau)
                                  : (cert.c_inf <= tau);
        sel.trail.push_back(std::move(cert));
        if (feasible && sel.selected < 0) {
            sel.selected = r;
            break;  // nondecreasing cost: first feasible is min-cost
        }
    }
    return sel;
}

template <class Scalar>
struct ContractionCertificate {
    Index block_id = -1;
    Scalar delta_rows = 0;  // projective diameter of the kernel
    Scalar delta_cols = 0;  // and of its transpose
    Scalar rho_hilbert = 0;
    Scalar score_range = 0;
    Scalar rho_range = 0;
    bool exact_computed = true;
};

namespace detail {

// Projective diameter of exp(S): max over row pairs of the oscillation of the
// row difference. O(n^2 m) exact evaluation.
template <class Scalar>
Scalar projective_diameter(const Matrix<Scalar>& S) {
    const Index n = S.rows();
    Scalar best = 0;
    for (Index i = 0; i < n; ++i) {
        for (Index k = i + 1; k < n; ++k) {
            Scalar mx = -std::numeric_limits<Scalar>::infinity();
            Scalar mn = std::numeric_limits<Scalar>::infinity();
            for (Index j = 0; j < S.cols(); ++j) {
                const Scalar d = S(i, j) - S(k, j);
                if (d > mx) mx = d;
                if (d < mn) mn = d;
            }
            if (mx - mn > best) best = mx - mn;
        }
    }
    return best;
}

template <class Scalar>
Matrix<Scalar> select_active(const Matrix<Scalar>& S, const std::vector<bool>& rows,
                             const std::vector<bool>& cols) {
    std::vector<Index> ri, ci;
    for (Index i = 0; i < S.rows(); ++i) {
        if (rows.empty() || rows[static_cast<size_t>(i)]) ri.push_back(i);
    }
    for (Index j = 0; j < S.cols(); ++j) {
        if (cols.empty() || cols[static_cast<size_t>(j)]) ci.push_back(j);
    }
    Matrix<Scalar> out(static_cast<Index>(ri.size()), static_cast<Index>(ci.size()));
    for (size_t a = 0; a < ri.size(); ++a) {
        for (size_t b = 0; b < ci.size(); ++b) {
            out(static_cast<Index>(a), static_cast<Index>(b)) = S(ri[a], ci[b]);
        }
    }
    return out;
}

}  // namespace detail

inline constexpr Index kExactDiameterCap = 256;

// Birkhoff-Hopf certificate on a strictly positive active block. Masked
// holes inside the active rectangle make the certificate inapplicable, which
// callers signal with non-finite score entries.
template <class Scalar>
ContractionCertificate<Scalar> projective_coefficient(const Matrix<Scalar>& block,
                                                      const std::vector<bool>& active_rows = {},
                                                      const std::vector<bool>& active_cols = {},
                                                      Scalar epsilon = Scalar(1)) {
    Matrix<Scalar> S = detail::select_active(block, active_rows, active_cols);
    if (S.rows() == 0 || S.cols() == 0) throw NotApplicable("empty active block");
    if (!S.allFinite()) {
        throw NotApplicable("block has masked holes; certificate is support-local");
    }
    if (!(epsilon > Scalar(0))) throw InvalidTemperature("epsilon must be > 0");
    if (epsilon != Scalar(1)) S /= epsilon;

    ContractionCertificate<Scalar> cert;
    cert.score_range = S.maxCoeff() - S.minCoeff();
    const Scalar tr = std::tanh(cert.score_range / Scalar(2));
    cert.rho_range = tr * tr;
    if (std::max(S.rows(), S.cols()) <= kExactDiameterCap) {
        cert.delta_rows = detail::projective_diameter(S);
        const Matrix<Scalar> St = S.transpose();
        cert.delta_cols = detail::projective_diameter(St);
        cert.rho_hilbert = std::tanh(cert.delta_rows / Scalar(4)) *
                           std::tanh(cert.delta_cols / Scalar(4));
    } else {
        cert.delta_rows = cert.delta_cols = std::numeric_limits<Scalar>::quiet_NaN();
        cert.rho_hilbert = std::numeric_limits<Scalar>::quiet_NaN();
        cert.exact_computed = false;
    }
    return cert;
}

// Observed contraction of the two-half-step scaling map in Hilbert metric,
// evaluated in log domain as oscillation of log-scaling differences.
template <class Scalar>
Scalar measure_hilbert_contraction(const Matrix<Scalar>& block, const Vector<Scalar>& log_c,
                                   const Vector<Scalar>& log_c_prime) {
    if (!block.allFinite()) throw NotApplicable("block has masked holes");
    if (log_c.size() != block.cols() || log_c_prime.size() != block.cols()) {
        throw std::invalid_argument("scaling vectors sized to the wrong block");
    }
    auto osc = [](const Vector<Scalar>& w) { return w.maxCoeff() - w.minCoeff(); };
    const Scalar d0 = osc(log_c - log_c_prime);
    if (!(d0 > Scalar(0))) {
        throw std::invalid_argument("proportional scalings have zero Hilbert distance");
    }
    auto scaling_map = [&](const Vector<Scalar>& w) {
        Vector<Scalar> p(block.rows());
        for (Index i = 0; i < block.rows(); ++i) {
            Scalar mx = -std::numeric_limits<Scalar>::infinity();
            for (Index j = 0; j < block.cols(); ++j) mx = std::max(mx, block(i, j) + w[j]);
            Scalar acc = 0;
            for (Index j = 0; j < block.cols(); ++j) acc += std::exp(block(i, j) + w[j] - mx);
            p[i] = mx + std::log(acc);
        }
        Vector<Scalar> q(block.cols());
        for (Index j = 0; j < block.cols(); ++j) {
            Scalar mx = -std::numeric_limits<Scalar>::infinity();
            for (Index i = 0; i < block.rows(); ++i) mx = std::max(mx, block(i, j) - p[i]);
            Scalar acc = 0;
            for (Index i = 0; i < block.rows(); ++i) acc += std::exp(block(i, j) - p[i] - mx);
            q[j] = mx + std::log(acc);
        }
        return Vector<Scalar>(-q);
    };
    const Vector<Scalar> t1 = scaling_map(log_c);
    const Vector<Scalar> t2 = scaling_map(log_c_prime);
    return osc(t1 - t2) / d0;
}

template <class Scalar>
struct OrbitPlanError {
    Index h_u = 0;
    Index h_v = 0;
    Scalar max_log_err = 0;
};

template <class Scalar>
struct OrbitReport {
    Index ref_u = 0;
    Index ref_v = 0;
    int stage = 0;
    std::vector<OrbitPlanError<Scalar>> plans;
    Scalar max_log_err = 0;
    Index skipped_cross_stage = 0;
};

namespace detail {

// A half-step plan is defined by the score field of its defining step, so the
// plan's stage is the stage of the later dual.
template <class Scalar>
int plan_stage(const DualTrace<Scalar>& trace, Index h_u, Index h_v) {
    return trace.stage_at(std::max(h_u, h_v));
}

}  // namespace detail

// Compares every same-stage half-step plan, in log domain, against the
// diagonal-scaled reconstruction from the reference plan. Under a
// continuation schedule the statement applies stagewise only.
template <class Scalar>
OrbitReport<Scalar> orbit_reconstruct(const ScoreField<Scalar>& raw, const DualTrace<Scalar>& trace,
                                      Index ref_u, Index ref_v, bool require_single_stage = false) {
    if (!raw.raw) throw std::invalid_argument("orbit_reconstruct expects raw (unscaled) scores");
    if (trace.stage_at(std::max(ref_u, ref_v)) < 0) {
        throw std::invalid_argument("reference plan must come from a solver step");
    }
    OrbitReport<Scalar> report;
    report.ref_u = ref_u;
    report.ref_v = ref_v;
    report.stage = detail::plan_stage(trace, ref_u, ref_v);

    const Scalar eps_stage = trace.eps_at(std::max(ref_u, ref_v));
    const ScoreField<Scalar> S = scale_to_temperature(raw, eps_stage);
    const TileSchedule& sched = S.sched();

    const Vector<Scalar> ua =
        trace.u(ref_u) + Vector<Scalar>::Constant(trace.u(ref_u).size(), trace.gauge(ref_u));
    const Vector<Scalar> vb =
        trace.v(ref_v) - Vector<Scalar>::Constant(trace.v(ref_v).size(), trace.gauge(ref_v));

    auto plan_error = [&](Index h_u, Index h_v) {
        const Vector<Scalar> uu =
            trace.u(h_u) + Vector<Scalar>::Constant(trace.u(h_u).size(), trace.gauge(h_u));
        const Vector<Scalar> vv =
            trace.v(h_v) - Vector<Scalar>::Constant(trace.v(h_v).size(), trace.gauge(h_v));
        const Vector<Scalar> log_row_scale = uu - ua;
        const Vector<Scalar> log_col_scale = vv - vb;
        Scalar mx = 0;
        for (size_t t = 0; t < sched.tile_count(); ++t) {
            const TileRange& r = sched.tiles()[t];
            const BoolArray& act = sched.tile_activity(t);
            const Matrix<Scalar>& blk = S.values.blocks[t];
            for (Index i = 0; i < r.rows(); ++i) {
                const Index gi = r.row_begin + i;
                for (Index j = 0; j < r.cols(); ++j) {
                    if (!act(i, j)) continue;
                    const Index gj = r.col_begin + j;
                    const Scalar direct = (blk(i, j) + uu[gi]) + vv[gj];
                    const Scalar recon =
                        (((blk(i, j) + ua[gi]) + vb[gj]) + log_row_scale[gi]) + log_col_scale[gj];
                    const Scalar e = std::abs(direct - recon);
                    if (e > mx) mx = e;
                }
            }
        }
        return mx;
    };

    for (Index h = 1; h <= trace.steps(); ++h) {
        for (const auto& [hu, hv] : {std::pair<Index, Index>{h, h - 1}, {h, h}}) {
            if (detail::plan_stage(trace, hu, hv) != report.stage) {
                if (require_single_stage) {
                    throw StageMismatch("plan (" + std::to_string(hu) + "," + std::to_string(hv) +
                                        ") is not in the reference stage");
                }
                ++report.skipped_cross_stage;
                continue;
            }
            OrbitPlanError<Scalar> e;
            e.h_u = hu;
            e.h_v = hv;
            e.max_log_err = plan_error(hu, hv);
            report.max_log_err = std::max(report.max_log_err, e.max_log_err);
            report.plans.push_back(e);
        }
    }
    return report;
}

}  // namespace sinktail
