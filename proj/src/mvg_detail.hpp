#pragma once

#include "rcbf/mvg.hpp"

namespace rcbf::detail {

Eigen::LLT<Eigen::MatrixXd> factor_kernel(const KernelParams& k,
                                          const Eigen::MatrixXd& X,
                                          double relative_jitter,
                                          double* used_jitter);

Eigen::MatrixXd window_inputs(const std::deque<TrainingSample>& w);
Eigen::MatrixXd window_outputs(const std::deque<TrainingSample>& w);

}  // namespace rcbf::detail
