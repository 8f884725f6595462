#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace spindyn {

using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using cplx = std::complex<double>;
using VecXc = Eigen::VectorXcd;
using MatXc = Eigen::MatrixXcd;
using Mat3c = Eigen::Matrix3cd;

constexpr double pi = 3.14159265358979323846;

} // namespace spindyn
