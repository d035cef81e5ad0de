#pragma once

// GEMM helpers shared by the regular and the offset-sampled convolution.
// Layouts are row-major: weights [Cout, K], cols [K, HW], out [Cout, HW].

#include <cstddef>

namespace topoconv::detail {

void gemm_forward(const double* weights, const double* cols, const double* bias, double* out, std::size_t cout,
                  std::size_t k, std::size_t hw);

// weight_grad += grad_out * cols^T ; cols_grad = weights^T * grad_out
void gemm_backward(const double* weights, const double* cols, const double* grad_out, double* weight_grad,
                   double* cols_grad, std::size_t cout, std::size_t k, std::size_t hw);

}  // namespace topoconv::detail
