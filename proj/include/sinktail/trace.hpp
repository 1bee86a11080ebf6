#pragma once

#include <vector>

#include "sinktail/errors.hpp"
#include "sinktail/types.hpp"

namespace sinktail {

// Fixed-budget temperature continuation: non-increasing stage temperatures
// whose iteration counts sum to the base depth T.
template <class Scalar>
struct EpsSchedule {
    struct Stage {
        Scalar epsilon;
        Index iterations;
    };
    std::vector<Stage> stages;

    static EpsSchedule single(Scalar epsilon, Index iterations) {
        EpsSchedule s;
        s.stages.push_back({epsilon, iterations});
        return s;
    }

    Index total_iterations() const {
        Index n = 0;
        for (const Stage& s : stages) n += s.iterations;
        return n;
    }

    Scalar final_epsilon() const {
        if (stages.empty()) throw InvalidTemperature("empty epsilon schedule");
        return stages.back().epsilon;
    }

    void validate(Index base_depth) const {
        if (stages.empty()) throw InvalidTemperature("empty epsilon schedule");
        Scalar prev = stages.front().epsilon;
        for (const Stage& s : stages) {
            if (!(s.epsilon > Scalar(0))) throw InvalidTemperature("stage epsilon must be > 0");
            if (s.epsilon > prev) throw InvalidTemperature("stage epsilons must be non-increasing");
            if (s.iterations < 0) throw std::invalid_argument("stage iterations must be >= 0");
            prev = s.epsilon;
        }
        if (total_iterations() != base_depth) {
            throw std::invalid_argument("epsilon schedule iterations do not sum to T");
        }
    }
};

// Full dual history. Step index h runs 0..T+R: h=0 is the cold start, h=T the
// stopped pair the tail restarts from, h=T+1..T+R the differentiable tail.
// Gauges are cumulative: the ungauged representatives are
// (u[h] + gauge[h], v[h] - gauge[h]).
template <class Scalar>
struct DualTrace {
    std::vector<Vector<Scalar>> u_hist;
    std::vector<Vector<Scalar>> v_hist;
    std::vector<Scalar> gauge_hist;   // cumulative; empty when not centered
    std::vector<Scalar> eps_hist;     // temperature used at step h (index 0 unused)
    std::vector<int> stage_hist;      // continuation stage id per step (index 0 unused)
    Index split = 0;                  // base/tail boundary T
    bool centered = true;

    Index steps() const { return static_cast<Index>(u_hist.size()) - 1; }
    Index tail_depth() const { return steps() - split; }

    const Vector<Scalar>& u(Index h) const { return u_hist[static_cast<size_t>(h)]; }
    const Vector<Scalar>& v(Index h) const { return v_hist[static_cast<size_t>(h)]; }

    Scalar gauge(Index h) const {
        if (!centered || gauge_hist.empty()) return Scalar(0);
        return gauge_hist[static_cast<size_t>(h)];
    }

    Scalar eps_at(Index h) const { return eps_hist[static_cast<size_t>(h)]; }
    int stage_at(Index h) const { return stage_hist[static_cast<size_t>(h)]; }

    Index tail_step(Index r) const { return split + r; }

    const Vector<Scalar>& tail_u(Index r) const { return u(split + r); }
    const Vector<Scalar>& tail_v(Index r) const { return v(split + r); }
    // Tail gauge relative to the stopped pair.
    Scalar tail_gauge(Index r) const { return gauge(split + r) - gauge(split); }
};

}  // namespace sinktail
