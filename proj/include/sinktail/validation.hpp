#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "sinktail/adjoint.hpp"
#include "sinktail/certificates.hpp"
#include "sinktail/oracle.hpp"
#include "sinktail/problem.hpp"

#include "json.hpp"

namespace sinktail {
namespace validation {

inline constexpr const char* kReportSchema = "sinktail-report/1";
inline constexpr const char* kLibraryVersion = "0.1.0";

enum class Precision { F32, F64 };

inline const char* precision_name(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

inline double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct TensorDeviation {
    double max_abs = 0.0;
    double rel_l2 = 0.0;
};

inline TensorDeviation deviation(const MatrixF64& got, const MatrixF64& ref) {
    TensorDeviation d;
    d.max_abs = (got - ref).cwiseAbs().maxCoeff();
    const double denom = ref.norm();
    d.rel_l2 = denom > 0 ? (got - ref).norm() / denom : 0.0;
    return d;
}

// Deterministic entry subset for the finite-difference oracle at sizes where
// sweeping every entry would dominate the run.
inline std::vector<std::pair<Index, Index>> fd_entry_subset(Index rows, Index cols,
                                                            Index max_entries,
                                                            std::uint64_t seed) {
    const Index total = rows * cols;
    std::vector<std::pair<Index, Index>> entries;
    if (total <= max_entries) return entries;  // empty: oracle sweeps everything
    entries.reserve(static_cast<size_t>(max_entries));
    std::uint64_t state = fold_tag(seed, "fd-subset");
    std::vector<bool> taken(static_cast<size_t>(total), false);
    while (static_cast<Index>(entries.size()) < max_entries) {
        state = splitmix64(state);
        const Index flat = static_cast<Index>(state % static_cast<std::uint64_t>(total));
        if (taken[static_cast<size_t>(flat)]) continue;
        taken[static_cast<size_t>(flat)] = true;
        entries.emplace_back(flat / cols, flat % cols);
    }
    return entries;
}

struct ExactnessRow {
    Index seq_len = 0;
    std::uint64_t seed = 0;
    Precision precision = Precision::F64;
    bool gradients_computed = false;
    // Optimized backward vs the dense analytic oracle (full tensors).
    TensorDeviation dq, dk, dv;
    double max_rel_l2 = 0.0;
    // Optimized backward vs the finite-difference oracle (subset at large L).
    double fd_max_abs_q = 0.0, fd_max_abs_k = 0.0, fd_max_abs_v = 0.0;
    Index fd_entries = 0;
    // Forward-consistency columns (always computed).
    double forward_f32_vs_f64 = 0.0;
    double forward_block_robustness = 0.0;
    double elapsed_ms = 0.0;
};

struct ExactnessParams {
    Index head_dim = 8;
    Index base_depth = 15;
    Index tail_depth = 2;
    double epsilon = 1.0;
    std::vector<std::pair<double, Index>> stages;  // empty: single temperature
    Index half_band = 256;  // clipped to L
    Index tile_block = 128;
    Index dustbin_block = 0;
    Index fd_max_entries = 1024;
    double fd_step = 1e-5;
};

template <class Scalar>
struct KernelGradients {
    MatrixF64 grad_q, grad_k, grad_v;
};

// Runs the optimized tiled pipeline at the requested precision and returns
// double-valued gradients for comparison.
template <class Scalar>
KernelGradients<Scalar> run_kernel_backward(const InstanceSpec& spec, const MatrixF64& g_fixed) {
    Instance<Scalar> inst = make_instance<Scalar>(spec);
    SurrogateRun<Scalar> run = run_surrogate(inst.Q, inst.K, inst.V, inst.schedule,
                                             spec.base_depth, spec.tail_depth, inst.eps);
    Matrix<Scalar> G = g_fixed.cast<Scalar>();
    CotangentSet<Scalar> c = r2_backward(run.scaled, run.trace, G, inst.Q, inst.K, inst.V,
                                         BackwardMode::OneReference);
    KernelGradients<Scalar> out;
    out.grad_q = c.grad_q.template cast<double>();
    out.grad_k = c.grad_k.template cast<double>();
    out.grad_v = c.grad_v.template cast<double>();
    return out;
}

// One oracle pass serves every precision row of the same (L, seed) case: the
// dense analytic reference and the finite-difference sweep are double
// precision regardless of the kernel precision under test.
inline std::vector<ExactnessRow> run_exactness_case(Index seq_len, std::uint64_t seed,
                                                    const std::vector<Precision>& precisions,
                                                    const ExactnessParams& params) {
    const double t0 = now_ms();
    InstanceSpec spec;
    spec.n_rows = spec.n_cols = seq_len;
    spec.head_dim = params.head_dim;
    spec.half_band = std::min(params.half_band, seq_len);
    spec.base_depth = params.base_depth;
    spec.tail_depth = params.tail_depth;
    spec.epsilon = params.epsilon;
    spec.stages = params.stages;
    spec.seed = seed;
    spec.tile_block = params.tile_block;
    spec.dustbin_block = params.dustbin_block;

    Instance<double> inst = make_instance<double>(spec);
    MatrixF64 g_fixed =
        normal_matrix<double>(seed, "G", inst.schedule->support().n_rows(), spec.head_dim);

    ExactnessRow shared;
    shared.seq_len = seq_len;
    shared.seed = seed;

    // Forward-consistency columns.
    {
        SurrogateRun<double> f64 = run_surrogate(inst.Q, inst.K, inst.V, inst.schedule,
                                                 spec.base_depth, spec.tail_depth, inst.eps);
        Instance<float> inst32 = make_instance<float>(spec);
        SurrogateRun<float> f32 = run_surrogate(inst32.Q, inst32.K, inst32.V, inst32.schedule,
                                                spec.base_depth, spec.tail_depth, inst32.eps);
        shared.forward_f32_vs_f64 =
            (f32.output.cast<double>() - f64.output).cwiseAbs().maxCoeff();
        InstanceSpec alt = spec;
        alt.tile_block = std::max<Index>(32, params.tile_block / 2);
        Instance<double> inst_alt = make_instance<double>(alt);
        SurrogateRun<double> f64b = run_surrogate(inst_alt.Q, inst_alt.K, inst_alt.V,
                                                  inst_alt.schedule, spec.base_depth,
                                                  spec.tail_depth, inst_alt.eps);
        shared.forward_block_robustness = (f64b.output - f64.output).cwiseAbs().maxCoeff();
    }

    std::vector<ExactnessRow> rows;
    if (seq_len > oracle::kDenseCap) {
        for (Precision p : precisions) {
            ExactnessRow row = shared;
            row.precision = p;
            row.elapsed_ms = now_ms() - t0;
            rows.push_back(row);  // forward-consistency evidence only
        }
        return rows;
    }

    // Dense analytic oracle of the same stopped surrogate.
    oracle::DenseProblem dp;
    dp.Q = inst.Q;
    dp.K = inst.K;
    dp.V = inst.V;
    const SupportMask& m = inst.schedule->support();
    dp.support = BoolArray::Constant(m.n_rows(), m.n_cols(), false);
    for (Index i = 0; i < m.n_rows(); ++i) {
        m.for_each_in_row(i, [&](Index j) { dp.support(i, j) = true; });
    }
    dp.epsilon = spec.epsilon;
    dp.base_depth = spec.base_depth;
    dp.tail_depth = spec.tail_depth;
    dp.schedule = make_eps_schedule<double>(spec);
    dp.loss = LossSpec<double>::linear(g_fixed);
    const oracle::DenseGradients ref = oracle::dense_surrogate_grad(dp);

    oracle::FdOptions fd;
    fd.step = params.fd_step;
    fd.variant = oracle::FdVariant::Surrogate;
    fd.entries = fd_entry_subset(inst.Q.rows(), params.head_dim, params.fd_max_entries, seed);
    const MatrixF64 fd_q = oracle::finite_diff_grad(dp, oracle::FdTensor::Q, fd);
    const MatrixF64 fd_k = oracle::finite_diff_grad(dp, oracle::FdTensor::K, fd);
    const MatrixF64 fd_v = oracle::finite_diff_grad(dp, oracle::FdTensor::V, fd);

    for (Precision p : precisions) {
        ExactnessRow row = shared;
        row.precision = p;
        row.gradients_computed = true;
        KernelGradients<double> kg;
        if (p == Precision::F32) {
            KernelGradients<float> k32 = run_kernel_backward<float>(spec, g_fixed);
            kg.grad_q = k32.grad_q;
            kg.grad_k = k32.grad_k;
            kg.grad_v = k32.grad_v;
        } else {
            kg = run_kernel_backward<double>(spec, g_fixed);
        }
        row.dq = deviation(kg.grad_q, ref.grad_q);
        row.dk = deviation(kg.grad_k, ref.grad_k);
        row.dv = deviation(kg.grad_v, ref.grad_v);
        row.max_rel_l2 = std::max({row.dq.rel_l2, row.dk.rel_l2, row.dv.rel_l2});
        row.fd_entries = fd.entries.empty() ? inst.Q.rows() * params.head_dim
                                            : static_cast<Index>(fd.entries.size());
        row.fd_max_abs_q = oracle::max_abs_diff_on(fd_q, kg.grad_q);
        row.fd_max_abs_k = oracle::max_abs_diff_on(fd_k, kg.grad_k);
        row.fd_max_abs_v = oracle::max_abs_diff_on(fd_v, kg.grad_v);
        row.elapsed_ms = now_ms() - t0;
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json exactness_row_json(const ExactnessRow& r) {
    nlohmann::json j;
    j["L"] = r.seq_len;
    j["seed"] = r.seed;
    j["precision"] = precision_name(r.precision);
    j["forward_f32_vs_f64"] = r.forward_f32_vs_f64;
    j["forward_block_robustness"] = r.forward_block_robustness;
    if (r.gradients_computed) {
        j["max_abs_dQ"] = r.dq.max_abs;
        j["max_abs_dK"] = r.dk.max_abs;
        j["max_abs_dV"] = r.dv.max_abs;
        j["max_rel_l2"] = r.max_rel_l2;
        j["fd_max_abs_dQ"] = r.fd_max_abs_q;
        j["fd_max_abs_dK"] = r.fd_max_abs_k;
        j["fd_max_abs_dV"] = r.fd_max_abs_v;
        j["fd_entries_per_tensor"] = r.fd_entries;
    } else {
        j["gradients"] = "skipped";
    }
    return j;
}

struct OrbitRun {
    Index seq_len = 0;
    std::uint64_t seed = 0;
    Precision precision = Precision::F64;
    Index plan_count = 0;
    Index ref_u = 0;
    Index ref_v = 0;
    int stage = 0;
    double max_log_err = 0.0;
};

template <class Scalar>
OrbitRun run_orbit_case(Index seq_len, Index half_band, Index base_depth, Index tail_depth,
                        double epsilon, std::uint64_t seed, Index tile_block = 128,
                        std::vector<std::pair<double, Index>> stages = {},
                        Index dustbin_block = 0) {
    InstanceSpec spec;
    spec.n_rows = spec.n_cols = seq_len;
    spec.half_band = std::min(half_band, seq_len);
    spec.base_depth = base_depth;
    spec.tail_depth = tail_depth;
    spec.epsilon = epsilon;
    spec.stages = std::move(stages);
    spec.seed = seed;
    spec.tile_block = tile_block;
    spec.dustbin_block = dustbin_block;
    Instance<Scalar> inst = make_instance<Scalar>(spec);
    ScoreField<Scalar> raw = raw_scores<Scalar>(inst.Q, inst.K, inst.schedule);
    DualTrace<Scalar> tr = stopped_base_solve(raw, base_depth, inst.eps);
    tail_refine(raw, tr, tail_depth, inst.eps.final_epsilon());
    OrbitReport<Scalar> rep = orbit_reconstruct(raw, tr, tr.steps(), tr.steps());
    OrbitRun out;
    out.seq_len = seq_len;
    out.seed = seed;
    out.precision = std::is_same_v<Scalar, float> ? Precision::F32 : Precision::F64;
    out.plan_count = static_cast<Index>(rep.plans.size());
    out.ref_u = rep.ref_u;
    out.ref_v = rep.ref_v;
    out.stage = rep.stage;
    out.max_log_err = static_cast<double>(rep.max_log_err);
    return out;
}

struct BiasRow {
    Index tail_depth = 0;
    double max_eta_norm = 0.0;
    double max_c_inf = 0.0;
    double max_c_l2 = 0.0;
    double max_gap = 0.0;
    double max_residual = 0.0;
};

struct BiasReport {
    std::vector<BiasRow> rows;
    Index selected_depth = -2;
    double tau = 0.0;
    std::vector<Index> per_seed_selection;
};

inline BiasReport run_bias_report(Index seq_len, Index half_band, Index head_dim, Index base_depth,
                                  const std::vector<Index>& depths,
                                  const std::vector<std::uint64_t>& seeds, double tau,
                                  Index r_max, double loss_scale, Index tile_block = 128) {
    BiasReport report;
    report.tau = tau;
    for (Index r : depths) report.rows.push_back({r, 0.0, 0.0, 0.0, 0.0, 0.0});
    for (std::uint64_t seed : seeds) {
        InstanceSpec spec;
        spec.n_rows = spec.n_cols = seq_len;
        spec.half_band = std::min(half_band, seq_len);
        spec.head_dim = head_dim;
        spec.base_depth = base_depth;
        spec.tail_depth = 2;
        spec.seed = seed;
        spec.tile_block = tile_block;
        Instance<double> inst = make_instance<double>(spec);
        CertificateProblem p;
        p.Q = inst.Q;
        p.K = inst.K;
        p.V = inst.V;
        p.schedule = inst.schedule;
        p.base_depth = base_depth;
        p.eps = inst.eps;
        const SupportMask& m = inst.schedule->support();
        p.loss = LossSpec<double>::linear(
            normal_matrix<double>(seed, "G", m.n_rows(), head_dim, loss_scale));

        for (size_t k = 0; k < depths.size(); ++k) {
            BiasCertificate cert = bias_certificate(p, depths[k]);
            BiasRow& row = report.rows[k];
            row.max_eta_norm = std::max(row.max_eta_norm, cert.eta_norm);
            row.max_c_inf = std::max(row.max_c_inf, cert.c_inf);
            row.max_c_l2 = std::max(row.max_c_l2, cert.c_l2);
            if (cert.residual_computed) {
                row.max_gap = std::max(row.max_gap, cert.max_gap);
                row.max_residual = std::max(row.max_residual, cert.residual);
            }
        }
        TailDepthSelection sel = select_tail_depth(p, tau, r_max);
        report.per_seed_selection.push_back(sel.selected);
        if (report.selected_depth == -2) {
            report.selected_depth = sel.selected;
        } else if (report.selected_depth != sel.selected) {
            report.selected_depth = -3;  // seeds disagree; surfaced in the report
        }
    }
    return report;
}

struct BenchResult {
    Index seq_len = 0;
    Precision precision = Precision::F32;
    int repetitions = 0;
    double direct_mean_ms = 0.0, direct_min_ms = 0.0, direct_max_ms = 0.0;
    double one_ref_mean_ms = 0.0, one_ref_min_ms = 0.0, one_ref_max_ms = 0.0;
    double speedup = 0.0;
    double max_abs_dscore = 0.0;
    double max_abs_dq = 0.0, max_abs_dk = 0.0, max_abs_dv = 0.0;
    double l2_dq = 0.0, l2_dk = 0.0, l2_dv = 0.0;
    std::int64_t direct_plan_bytes = 0;
    std::int64_t one_ref_plan_bytes = 0;
    bool timing_skipped = false;
};

template <class Scalar>
BenchResult run_bench_case(Index seq_len, Index half_band, Index head_dim, Index base_depth,
                           double epsilon, std::uint64_t seed, int repetitions, int warmup,
                           Index tile_block = 128, bool skip_timing = false) {
    InstanceSpec spec;
    spec.n_rows = spec.n_cols = seq_len;
    spec.half_band = std::min(half_band, seq_len);
    spec.head_dim = head_dim;
    spec.base_depth = base_depth;
    spec.tail_depth = 2;
    spec.epsilon = epsilon;
    spec.seed = seed;
    spec.tile_block = tile_block;
    Instance<Scalar> inst = make_instance<Scalar>(spec);
    SurrogateRun<Scalar> run = run_surrogate(inst.Q, inst.K, inst.V, inst.schedule, base_depth, 2,
                                             inst.eps);
    Matrix<Scalar> G = normal_matrix<Scalar>(seed, "G", inst.schedule->support().n_rows(),
                                             head_dim);

    BenchResult res;
    res.seq_len = seq_len;
    res.precision = std::is_same_v<Scalar, float> ? Precision::F32 : Precision::F64;
    res.repetitions = repetitions;
    res.timing_skipped = skip_timing;

    CotangentSet<Scalar> one = r2_backward(run.scaled, run.trace, G, inst.Q, inst.K, inst.V,
                                           BackwardMode::OneReference);
    CotangentSet<Scalar> four = r2_backward(run.scaled, run.trace, G, inst.Q, inst.K, inst.V,
                                            BackwardMode::DirectFourPlan);
    double max_ds = 0.0;
    for (size_t t = 0; t < one.score_bar.blocks.size(); ++t) {
        max_ds = std::max<double>(
            max_ds, (one.score_bar.blocks[t] - four.score_bar.blocks[t]).cwiseAbs().maxCoeff());
    }
    res.max_abs_dscore = max_ds;
    res.max_abs_dq = static_cast<double>((one.grad_q - four.grad_q).cwiseAbs().maxCoeff());
    res.max_abs_dk = static_cast<double>((one.grad_k - four.grad_k).cwiseAbs().maxCoeff());
    res.max_abs_dv = static_cast<double>((one.grad_v - four.grad_v).cwiseAbs().maxCoeff());
    res.l2_dq = static_cast<double>((one.grad_q - four.grad_q).norm());
    res.l2_dk = static_cast<double>((one.grad_k - four.grad_k).norm());
    res.l2_dv = static_cast<double>((one.grad_v - four.grad_v).norm());

    const std::int64_t entries = inst.schedule->active_edges();
    res.direct_plan_bytes = 4 * entries * static_cast<std::int64_t>(sizeof(Scalar));
    res.one_ref_plan_bytes = entries * static_cast<std::int64_t>(sizeof(Scalar));

    if (!skip_timing) {
        auto time_mode = [&](BackwardMode mode, double& mean, double& mn, double& mx) {
            for (int w = 0; w < warmup; ++w) {
                r2_backward(run.scaled, run.trace, G, inst.Q, inst.K, inst.V, mode);
            }
            std::vector<double> times;
            times.reserve(static_cast<size_t>(repetitions));
            for (int rep = 0; rep < repetitions; ++rep) {
                const double t0 = now_ms();
                r2_backward(run.scaled, run.trace, G, inst.Q, inst.K, inst.V, mode);
                times.push_back(now_ms() - t0);
            }
            mean = 0;
            mn = times[0];
            mx = times[0];
            for (double t : times) {
                mean += t;
                mn = std::min(mn, t);
                mx = std::max(mx, t);
            }
            mean /= static_cast<double>(times.size());
        };
        time_mode(BackwardMode::DirectFourPlan, res.direct_mean_ms, res.direct_min_ms,
                  res.direct_max_ms);
        time_mode(BackwardMode::OneReference, res.one_ref_mean_ms, res.one_ref_min_ms,
                  res.one_ref_max_ms);
        res.speedup = res.direct_mean_ms / res.one_ref_mean_ms;
    }
    return res;
}

struct ContractionSummary {
    Index blocks = 0;
    Index skipped_not_applicable = 0;
    double median_rho = 0.0;
    double p95_rho = 0.0;
    double max_rho = 0.0;
    double median_rho_range = 0.0;
    double max_rho_range = 0.0;
    Index observed_violations = 0;
    nlohmann::json per_block = nlohmann::json::array();
};

// Certificates for every fully-active tile of a generated instance plus the
// observed two-half-step contraction on random scaling pairs.
inline ContractionSummary run_contraction_case(Index seq_len, Index half_band, Index head_dim,
                                               double epsilon, std::uint64_t seed,
                                               Index tile_block, int probes_per_block) {
    InstanceSpec spec;
    spec.n_rows = spec.n_cols = seq_len;
    spec.half_band = std::min(half_band, seq_len);
    spec.head_dim = head_dim;
    spec.epsilon = epsilon;
    spec.seed = seed;
    spec.tile_block = tile_block;
    Instance<double> inst = make_instance<double>(spec);
    ScoreField<double> S = scaled_scores<double>(inst.Q, inst.K, epsilon, inst.schedule);
    const TileSchedule& sched = *inst.schedule;

    ContractionSummary sum;
    std::vector<double> rhos, ranges;
    for (size_t t = 0; t < sched.tile_count(); ++t) {
        if (!sched.tile_activity(t).all()) {
            ++sum.skipped_not_applicable;  // support-local: masked holes excluded
            continue;
        }
        const Matrix<double>& blk = S.values.blocks[t];
        ContractionCertificate<double> cert = projective_coefficient(blk);
        cert.block_id = static_cast<Index>(t);
        for (int probe = 0; probe < probes_per_block; ++probe) {
            VectorF64 c = normal_matrix<double>(seed + probe, "hc", blk.cols(), 1).col(0);
            VectorF64 cp = normal_matrix<double>(seed + probe, "hcp", blk.cols(), 1).col(0);
            const double observed = measure_hilbert_contraction(blk, c, cp);
            if (cert.exact_computed && observed > cert.rho_hilbert + 1e-12) {
                ++sum.observed_violations;
            }
        }
        rhos.push_back(cert.rho_hilbert);
        ranges.push_back(cert.rho_range);
        nlohmann::json bj;
        bj["block"] = cert.block_id;
        bj["delta"] = cert.delta_rows;
        bj["rho_h"] = cert.rho_hilbert;
        bj["rho_range"] = cert.rho_range;
        sum.per_block.push_back(std::move(bj));
    }
    sum.blocks = static_cast<Index>(rhos.size());
    auto quantile = [](std::vector<double> v, double q) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const size_t idx = static_cast<size_t>(q * static_cast<double>(v.size() - 1));
        return v[idx];
    };
    sum.median_rho = quantile(rhos, 0.5);
    sum.p95_rho = quantile(rhos, 0.95);
    sum.max_rho = rhos.empty() ? 0.0 : *std::max_element(rhos.begin(), rhos.end());
    sum.median_rho_range = quantile(ranges, 0.5);
    sum.max_rho_range = ranges.empty() ? 0.0 : *std::max_element(ranges.begin(), ranges.end());
    return sum;
}

}  // namespace validation
}  // namespace sinktail
