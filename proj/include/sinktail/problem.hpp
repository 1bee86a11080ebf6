#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sinktail/rng.hpp"
#include "sinktail/sinkhorn.hpp"
#include "sinktail/support.hpp"

#include "json.hpp"

namespace sinktail {

// Synthetic instance recipe. Tensors are i.i.d. standard normal from the
// counter-based generator, keyed by (seed, tensor tag), so instances are
// portable across runs and implementations.
struct InstanceSpec {
    Index n_rows = 64;
    Index n_cols = 64;
    Index head_dim = 8;
    Index half_band = 16;
    Index base_depth = 15;
    Index tail_depth = 2;
    double epsilon = 1.0;
    std::vector<std::pair<double, Index>> stages;  // empty -> single stage
    std::uint64_t seed = 0;
    Index dustbin_block = 0;  // 0: plain banded support
    Index tile_block = 64;

    nlohmann::json to_json() const;
    static InstanceSpec from_json(const nlohmann::json& j);
};

template <class Scalar>
struct Instance {
    InstanceSpec spec;
    Matrix<Scalar> Q, K, V;
    std::shared_ptr<const TileSchedule> schedule;
    EpsSchedule<Scalar> eps;
};

template <class Scalar>
EpsSchedule<Scalar> make_eps_schedule(const InstanceSpec& spec) {
    if (spec.stages.empty()) {
        return EpsSchedule<Scalar>::single(static_cast<Scalar>(spec.epsilon), spec.base_depth);
    }
    EpsSchedule<Scalar> s;
    for (const auto& [eps, iters] : spec.stages) {
        s.stages.push_back({static_cast<Scalar>(eps), iters});
    }
    return s;
}

template <class Scalar>
Instance<Scalar> make_instance(const InstanceSpec& spec) {
    Instance<Scalar> inst;
    inst.spec = spec;
    inst.Q = normal_matrix<Scalar>(spec.seed, "Q", spec.n_rows, spec.head_dim);
    inst.K = normal_matrix<Scalar>(spec.seed, "K", spec.n_cols, spec.head_dim);
    inst.V = normal_matrix<Scalar>(spec.seed, "V", spec.n_cols, spec.head_dim);
    SupportMask mask = build_band_support(spec.n_rows, spec.n_cols, spec.half_band);
    if (spec.dustbin_block > 0) {
        AugmentedSupport aug = augment_dustbin(mask, spec.dustbin_block);
        // One learned token per side; fillers are inactive and stay zero.
        Matrix<Scalar> zq = Matrix<Scalar>::Zero(spec.dustbin_block, spec.head_dim);
        zq.row(0) = normal_matrix<Scalar>(spec.seed, "dustbin_q", 1, spec.head_dim);
        Matrix<Scalar> zk = Matrix<Scalar>::Zero(spec.dustbin_block, spec.head_dim);
        zk.row(0) = normal_matrix<Scalar>(spec.seed, "dustbin_k", 1, spec.head_dim);
        Matrix<Scalar> zv = Matrix<Scalar>::Zero(spec.dustbin_block, spec.head_dim);
        zv.row(0) = normal_matrix<Scalar>(spec.seed, "dustbin_v", 1, spec.head_dim);
        Matrix<Scalar> q2(spec.n_rows + spec.dustbin_block, spec.head_dim);
        q2 << inst.Q, zq;
        Matrix<Scalar> k2(spec.n_cols + spec.dustbin_block, spec.head_dim);
        k2 << inst.K, zk;
        Matrix<Scalar> v2(spec.n_cols + spec.dustbin_block, spec.head_dim);
        v2 << inst.V, zv;
        inst.Q = std::move(q2);
        inst.K = std::move(k2);
        inst.V = std::move(v2);
        inst.schedule = TileSchedule::build(aug.mask, spec.tile_block);
    } else {
        inst.schedule = TileSchedule::build(mask, spec.tile_block);
    }
    inst.eps = make_eps_schedule<Scalar>(spec);
    return inst;
}

// Problem container: a JSON header followed by raw row-major little-endian
// scalar buffers, one file.
struct ProblemContainer {
    InstanceSpec spec;
    SupportMask support;
    MatrixF64 Q, K, V;
};

void save_problem(const std::string& path, const ProblemContainer& p);
ProblemContainer load_problem(const std::string& path);

}  // namespace sinktail
