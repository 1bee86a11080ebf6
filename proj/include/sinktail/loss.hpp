#pragma once

#include <vector>

#include "sinktail/types.hpp"

namespace sinktail {

enum class LossKind { FrobeniusToTarget, Linear, SupervisedValueMse };

// Scalar losses over the transport output. The supervised kind is the mean
// value-vector MSE against a target column per active row; it depends on V
// both through the output and directly through the targets, so it exposes the
// direct value cotangent separately from the output cotangent.
template <class Scalar>
struct LossSpec {
    LossKind kind = LossKind::Linear;
    Matrix<Scalar> fixed;              // O_target (frobenius) or fixed G (linear)
    std::vector<Index> target_cols;    // supervised kind, one per row

    static LossSpec linear(Matrix<Scalar> g) {
        LossSpec l;
        l.kind = LossKind::Linear;
        l.fixed = std::move(g);
        return l;
    }
    static LossSpec frobenius_to_target(Matrix<Scalar> target) {
        LossSpec l;
        l.kind = LossKind::FrobeniusToTarget;
        l.fixed = std::move(target);
        return l;
    }
    static LossSpec supervised_value_mse(std::vector<Index> cols) {
        LossSpec l;
        l.kind = LossKind::SupervisedValueMse;
        l.target_cols = std::move(cols);
        return l;
    }

    Index active_rows(const std::vector<bool>& row_valid) const {
        Index n = 0;
        for (bool b : row_valid) n += b ? 1 : 0;
        return n;
    }

    Scalar value(const Matrix<Scalar>& O, const Matrix<Scalar>& V,
                 const std::vector<bool>& row_valid) const {
        Scalar acc = 0;
        switch (kind) {
            case LossKind::Linear:
                for (Index i = 0; i < O.rows(); ++i) {
                    if (row_valid[static_cast<size_t>(i)]) acc += fixed.row(i).dot(O.row(i));
                }
                return acc;
            case LossKind::FrobeniusToTarget:
                for (Index i = 0; i < O.rows(); ++i) {
                    if (row_valid[static_cast<size_t>(i)]) {
                        acc += (O.row(i) - fixed.row(i)).squaredNorm();
                    }
                }
                return Scalar(0.5) * acc;
            case LossKind::SupervisedValueMse: {
                const Index n = active_rows(row_valid);
                for (Index i = 0; i < O.rows(); ++i) {
                    if (!row_valid[static_cast<size_t>(i)]) continue;
                    acc += (O.row(i) - V.row(target_cols.at(static_cast<size_t>(i)))).squaredNorm();
                }
                return acc / static_cast<Scalar>(n);
            }
        }
        return acc;
    }

    Matrix<Scalar> output_cotangent(const Matrix<Scalar>& O, const Matrix<Scalar>& V,
                                    const std::vector<bool>& row_valid) const {
        Matrix<Scalar> G = Matrix<Scalar>::Zero(O.rows(), O.cols());
        switch (kind) {
            case LossKind::Linear:
                for (Index i = 0; i < O.rows(); ++i) {
                    if (row_valid[static_cast<size_t>(i)]) G.row(i) = fixed.row(i);
                }
                break;
            case LossKind::FrobeniusToTarget:
                for (Index i = 0; i < O.rows(); ++i) {
                    if (row_valid[static_cast<size_t>(i)]) G.row(i) = O.row(i) - fixed.row(i);
                }
                break;
            case LossKind::SupervisedValueMse: {
                const Scalar w = Scalar(2) / static_cast<Scalar>(active_rows(row_valid));
                for (Index i = 0; i < O.rows(); ++i) {
                    if (!row_valid[static_cast<size_t>(i)]) continue;
                    G.row(i) = w * (O.row(i) - V.row(target_cols.at(static_cast<size_t>(i))));
                }
                break;
            }
        }
        return G;
    }

    // Direct dependence on V via the targets; zero for the other kinds.
    Matrix<Scalar> direct_value_cotangent(const Matrix<Scalar>& O, const Matrix<Scalar>& V,
                                          const std::vector<bool>& row_valid) const {
        Matrix<Scalar> D = Matrix<Scalar>::Zero(V.rows(), V.cols());
        if (kind != LossKind::SupervisedValueMse) return D;
        const Scalar w = Scalar(2) / static_cast<Scalar>(active_rows(row_valid));
        for (Index i = 0; i < O.rows(); ++i) {
            if (!row_valid[static_cast<size_t>(i)]) continue;
            const Index c = target_cols.at(static_cast<size_t>(i));
            D.row(c) -= w * (O.row(i) - V.row(c));
        }
        return D;
    }
};

}  // namespace sinktail
