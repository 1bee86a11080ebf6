#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace sinktail {

using Index = std::int64_t;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixF32 = Matrix<float>;
using MatrixF64 = Matrix<double>;
using VectorF32 = Vector<float>;
using VectorF64 = Vector<double>;

}  // namespace sinktail
