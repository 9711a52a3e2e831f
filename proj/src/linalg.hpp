#pragma once

#include <Eigen/Dense>
#include <complex>

namespace gridkit {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

}  // namespace gridkit
