#pragma once

#include <Eigen/Dense>

namespace smpcval {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace smpcval
