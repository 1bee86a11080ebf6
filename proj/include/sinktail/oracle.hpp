#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "sinktail/errors.hpp"
#include "sinktail/loss.hpp"
#include "sinktail/trace.hpp"
#include "sinktail/types.hpp"

namespace sinktail {
namespace oracle {

// Dense double-precision reference used by every test. Reference semantics
// outrank speed: single-threaded, dense O(L^2) storage, hard size caps.
inline constexpr Index kDenseCap = 512;
inline constexpr Index kBpttCap = 256;

struct DenseProblem {
    MatrixF64 Q, K, V;
    BoolArray support;  // dense active-edge mask
    double epsilon = 1.0;
    Index base_depth = 0;
    Index tail_depth = 0;
    EpsSchedule<double> schedule;  // empty stages -> single stage at epsilon
    LossSpec<double> loss;

    Index rows() const { return support.rows(); }
    Index cols() const { return support.cols(); }

    std::vector<bool> row_valid() const {
        std::vector<bool> r(static_cast<size_t>(rows()));
        for (Index i = 0; i < rows(); ++i) r[static_cast<size_t>(i)] = support.row(i).any();
        return r;
    }
    std::vector<bool> col_valid() const {
        std::vector<bool> c(static_cast<size_t>(cols()));
        for (Index j = 0; j < cols(); ++j) c[static_cast<size_t>(j)] = support.col(j).any();
        return c;
    }

    EpsSchedule<double> resolved_schedule() const {
        if (schedule.stages.empty()) return EpsSchedule<double>::single(epsilon, base_depth);
        return schedule;
    }

    void check_cap(Index cap) const {
        if (rows() > cap || cols() > cap) {
            throw SizeCapExceeded("dense oracle cap exceeded: " + std::to_string(rows()) + "x" +
                                  std::to_string(cols()) + " > " + std::to_string(cap));
        }
    }
};

struct DenseTrace {
    std::vector<VectorF64> u_hist, v_hist;
    std::vector<double> gauge_hist;  // cumulative
    std::vector<double> eps_hist;
    Index split = 0;

    Index steps() const { return static_cast<Index>(u_hist.size()) - 1; }
};

struct DenseForward {
    MatrixF64 raw_scores;  // QK^T/sqrt(d), zero off support
    DenseTrace trace;
    MatrixF64 output;
    double loss_value = 0.0;
};

inline MatrixF64 dense_raw_scores(const DenseProblem& p) {
    MatrixF64 s = p.Q * p.K.transpose() / std::sqrt(static_cast<double>(p.Q.cols()));
    return p.support.select(s, MatrixF64::Zero(p.rows(), p.cols()));
}

inline VectorF64 dense_row_half_step(const MatrixF64& S, const BoolArray& supp,
                                     const VectorF64& v) {
    const Index n = S.rows();
    VectorF64 u = VectorF64::Zero(n);
    for (Index i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < S.cols(); ++j) {
            if (supp(i, j)) mx = std::max(mx, S(i, j) + v[j]);
        }
        if (!std::isfinite(mx)) continue;  // inactive row
        double acc = 0;
        for (Index j = 0; j < S.cols(); ++j) {
            if (supp(i, j)) acc += std::exp(S(i, j) + v[j] - mx);
        }
        u[i] = -(mx + std::log(acc));
    }
    return u;
}

inline VectorF64 dense_col_half_step(const MatrixF64& S, const BoolArray& supp,
                                     const VectorF64& u) {
    const Index n = S.cols();
    VectorF64 v = VectorF64::Zero(n);
    for (Index j = 0; j < n; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index i = 0; i < S.rows(); ++i) {
            if (supp(i, j)) mx = std::max(mx, S(i, j) + u[i]);
        }
        if (!std::isfinite(mx)) continue;
        double acc = 0;
        for (Index i = 0; i < S.rows(); ++i) {
            if (supp(i, j)) acc += std::exp(S(i, j) + u[i] - mx);
        }
        v[j] = -(mx + std::log(acc));
    }
    return v;
}

inline MatrixF64 dense_plan(const MatrixF64& S, const BoolArray& supp, const VectorF64& u,
                            const VectorF64& v, double log_gauge = 0.0) {
    MatrixF64 p = MatrixF64::Zero(S.rows(), S.cols());
    for (Index i = 0; i < S.rows(); ++i) {
        for (Index j = 0; j < S.cols(); ++j) {
            if (supp(i, j)) p(i, j) = std::exp(S(i, j) + u[i] + v[j] + log_gauge);
        }
    }
    return p;
}

// Forward with the given base pair frozen (used by the stopped-gradient
// finite-difference variant). When frozen is nullopt the base is solved.
struct FrozenBase {
    VectorF64 u, v;
    double gauge = 0.0;
};

inline DenseForward dense_forward_impl(const DenseProblem& p,
                                       const std::optional<FrozenBase>& frozen) {
    p.check_cap(kDenseCap);
    const auto row_valid = p.row_valid();
    DenseForward fwd;
    fwd.raw_scores = dense_raw_scores(p);
    const EpsSchedule<double> sched = p.resolved_schedule();
    sched.validate(p.base_depth);

    DenseTrace& tr = fwd.trace;
    tr.u_hist.push_back(VectorF64::Zero(p.rows()));
    tr.v_hist.push_back(VectorF64::Zero(p.cols()));
    tr.gauge_hist.push_back(0.0);
    tr.eps_hist.push_back(0.0);

    auto advance = [&](const MatrixF64& S, double eps) {
        VectorF64 a = dense_row_half_step(S, p.support, tr.v_hist.back());
        VectorF64 b = dense_col_half_step(S, p.support, a);
        double sum = 0;
        Index cnt = 0;
        for (Index i = 0; i < p.rows(); ++i) {
            if (row_valid[static_cast<size_t>(i)]) {
                sum += a[i];
                ++cnt;
            }
        }
        const double c = sum / static_cast<double>(cnt);
        for (Index i = 0; i < p.rows(); ++i) {
            if (row_valid[static_cast<size_t>(i)]) a[i] -= c;
        }
        b.array() += c;
        tr.u_hist.push_back(std::move(a));
        tr.v_hist.push_back(std::move(b));
        tr.gauge_hist.push_back(tr.gauge_hist.back() + c);
        tr.eps_hist.push_back(eps);
    };

    if (frozen.has_value()) {
        tr.u_hist = {frozen->u};
        tr.v_hist = {frozen->v};
        tr.gauge_hist = {frozen->gauge};
        tr.split = 0;
    } else {
        for (const auto& stage : sched.stages) {
            const MatrixF64 S = fwd.raw_scores / stage.epsilon;
            for (Index k = 0; k < stage.iterations; ++k) advance(S, stage.epsilon);
        }
        tr.split = tr.steps();
    }

    const double eps_final = sched.final_epsilon();
    const MatrixF64 S_final = fwd.raw_scores / eps_final;
    for (Index r = 0; r < p.tail_depth; ++r) advance(S_final, eps_final);

    const Index h = tr.steps();
    const MatrixF64 plan = dense_plan(S_final, p.support, tr.u_hist[h], tr.v_hist[h]);
    fwd.output = plan * p.V;
    fwd.loss_value = p.loss.value(fwd.output, p.V, row_valid);
    return fwd;
}

inline DenseForward dense_forward(const DenseProblem& p) { return dense_forward_impl(p, std::nullopt); }

struct DenseGradients {
    MatrixF64 grad_q, grad_k, grad_v;
    VectorF64 eta_u, eta_v;  // cotangent arriving at the stopped pair
};

// Analytic reverse pass through the tail only (the stopped surrogate) or
// through all T+R steps (full BPTT), with explicit centering pullbacks. This
// is the exact adjoint of the computed graph, written densely and
// independently of the tiled implementation.
inline DenseGradients dense_reverse(const DenseProblem& p, const DenseForward& fwd,
                                    bool through_base) {
    const auto row_valid = p.row_valid();
    const Index n_valid = static_cast<Index>(std::count(row_valid.begin(), row_valid.end(), true));
    const DenseTrace& tr = fwd.trace;
    const Index H = tr.steps();
    const Index stop = through_base ? 0 : tr.split;
    const double eps_final = p.resolved_schedule().final_epsilon();

    DenseGradients g;
    g.grad_v = MatrixF64::Zero(p.V.rows(), p.V.cols());
    MatrixF64 raw_score_bar = MatrixF64::Zero(p.rows(), p.cols());

    // Terminal transport application.
    const MatrixF64 S_final = fwd.raw_scores / eps_final;
    const MatrixF64 plan = dense_plan(S_final, p.support, tr.u_hist[H], tr.v_hist[H]);
    const MatrixF64 G = p.loss.output_cotangent(fwd.output, p.V, row_valid);
    const MatrixF64 Z = G * p.V.transpose();
    const MatrixF64 W = plan.cwiseProduct(Z);
    raw_score_bar += W / eps_final;
    g.grad_v = plan.transpose() * G + p.loss.direct_value_cotangent(fwd.output, p.V, row_valid);

    VectorF64 u_bar = W.rowwise().sum();
    VectorF64 v_bar = W.colwise().sum().transpose();

    for (Index h = H; h > stop; --h) {
        const double eps_h = tr.eps_hist[static_cast<size_t>(h)];
        const MatrixF64 S_h = fwd.raw_scores / eps_h;
        // Centering pullback: cotangents on the centered pair map to the raw
        // half-step outputs.
        const double delta = v_bar.sum() - u_bar.sum();
        for (Index i = 0; i < p.rows(); ++i) {
            if (row_valid[static_cast<size_t>(i)]) u_bar[i] += delta / static_cast<double>(n_valid);
        }
        // v half-step reverse (same-time plan).
        const MatrixF64 p_same =
            dense_plan(S_h, p.support, tr.u_hist[h], tr.v_hist[h]);
        u_bar -= p_same * v_bar;
        raw_score_bar -= p_same.cwiseProduct(VectorF64::Ones(p.rows()) * v_bar.transpose()) / eps_h;
        // u half-step reverse (mixed-time plan, ungauged via the ledger).
        const double lg = tr.gauge_hist[static_cast<size_t>(h)] -
                          tr.gauge_hist[static_cast<size_t>(h - 1)];
        const MatrixF64 p_mixed =
            dense_plan(S_h, p.support, tr.u_hist[h], tr.v_hist[h - 1], lg);
        VectorF64 v_prev = -(p_mixed.transpose() * u_bar);
        raw_score_bar -= p_mixed.cwiseProduct(u_bar * VectorF64::Ones(p.cols()).transpose()) / eps_h;
        v_bar = std::move(v_prev);
        u_bar = VectorF64::Zero(p.rows());
    }

    g.eta_u = u_bar;
    g.eta_v = v_bar;
    const double inv = 1.0 / std::sqrt(static_cast<double>(p.Q.cols()));
    g.grad_q = inv * (raw_score_bar * p.K);
    g.grad_k = inv * (raw_score_bar.transpose() * p.Q);
    return g;
}

inline DenseGradients full_bptt_grad(const DenseProblem& p) {
    p.check_cap(kBpttCap);
    const DenseForward fwd = dense_forward(p);
    return dense_reverse(p, fwd, /*through_base=*/true);
}

inline DenseGradients dense_surrogate_grad(const DenseProblem& p) {
    const DenseForward fwd = dense_forward(p);
    return dense_reverse(p, fwd, /*through_base=*/false);
}

enum class FdVariant { Surrogate, Full };
enum class FdTensor { Q, K, V };

// Central differences through the full pipeline with stop-gradient semantics:
// the surrogate variant freezes the base pair at its unperturbed value and
// re-runs only the tail; the full variant re-solves the base per perturbation.
// Per-entry step is h*(1+|x|) since gradient magnitudes span decades. An entry
// subset keeps large cases inside the oracle time budget; entries outside the
// subset are left NaN.
struct FdOptions {
    double step = 1e-5;
    FdVariant variant = FdVariant::Surrogate;
    std::vector<std::pair<Index, Index>> entries;  // empty -> all entries
};

inline MatrixF64 finite_diff_grad(const DenseProblem& p, FdTensor wrt, const FdOptions& opt) {
    p.check_cap(kDenseCap);
    if (!(opt.step > 0)) throw std::invalid_argument("finite-difference step must be > 0");
    if (opt.step < 1e-9) {
        throw std::invalid_argument("finite-difference step too small for double precision");
    }

    std::optional<FrozenBase> frozen;
    if (opt.variant == FdVariant::Surrogate) {
        DenseProblem base_only = p;
        base_only.tail_depth = 0;
        const DenseForward base = dense_forward(base_only);
        FrozenBase fb;
        fb.u = base.trace.u_hist.back();
        fb.v = base.trace.v_hist.back();
        fb.gauge = base.trace.gauge_hist.back();
        frozen = fb;
    }

    const MatrixF64* src = wrt == FdTensor::Q ? &p.Q : (wrt == FdTensor::K ? &p.K : &p.V);
    MatrixF64 grad = MatrixF64::Constant(src->rows(), src->cols(),
                                         std::numeric_limits<double>::quiet_NaN());

    std::vector<std::pair<Index, Index>> entries = opt.entries;
    if (entries.empty()) {
        for (Index i = 0; i < src->rows(); ++i) {
            for (Index j = 0; j < src->cols(); ++j) entries.emplace_back(i, j);
        }
    }

    DenseProblem work = p;
    MatrixF64* dst = wrt == FdTensor::Q ? &work.Q : (wrt == FdTensor::K ? &work.K : &work.V);
    for (const auto& [i, j] : entries) {
        const double x = (*src)(i, j);
        const double h = opt.step * (1.0 + std::abs(x));
        (*dst)(i, j) = x + h;
        const double lp = dense_forward_impl(work, frozen).loss_value;
        (*dst)(i, j) = x - h;
        const double lm = dense_forward_impl(work, frozen).loss_value;
        (*dst)(i, j) = x;
        grad(i, j) = (lp - lm) / (2.0 * h);
    }
    return grad;
}

inline double max_abs_diff_on(const MatrixF64& fd, const MatrixF64& analytic) {
    double mx = 0;
    for (Index i = 0; i < fd.rows(); ++i) {
        for (Index j = 0; j < fd.cols(); ++j) {
            if (std::isnan(fd(i, j))) continue;
            mx = std::max(mx, std::abs(fd(i, j) - analytic(i, j)));
        }
    }
    return mx;
}

}  // namespace oracle
}  // namespace sinktail
