#pragma once

#include <cstdint>

// Dense numeric kernels behind the network layers. Every kernel comes in two
// builds: a plain serial reference and an OpenMP version that parallelizes
// over independent output elements only, keeping the inner accumulation order
// identical. The two are bitwise-equal by construction, which the test suite
// checks, so switching Exec never changes results.
namespace uvcl::kernels {

enum class Exec { Serial, Parallel };

// Process-wide default used by the layer code. Tests and the benchmark pass
// an explicit Exec instead.
Exec& default_exec();

// 2-D convolution, stride 1, square kernel, zero padding.
// x: [n, c, h, w]   weights: [oc, c, ks, ks]   bias: [oc] (may be null)
// y: [n, oc, h + 2*pad - ks + 1, w + 2*pad - ks + 1]
void conv2d_forward(Exec mode, const double* x, int n, int c, int h, int w,
                    const double* weights, int oc, int ks, int pad,
                    const double* bias, double* y);

// dx gets the gradient w.r.t. x; caller provides a zeroed buffer.
void conv2d_backward_input(Exec mode, const double* dy, const double* weights,
                           int n, int c, int h, int w, int oc, int ks, int pad,
                           double* dx);

// Accumulates into dw/db (callers zero them once per optimizer step).
void conv2d_backward_params(Exec mode, const double* x, const double* dy,
                            int n, int c, int h, int w, int oc, int ks, int pad,
                            double* dw, double* db);

// Fully connected: y[i,o] = sum_j x[i,j] * w[o,j] + b[o].
void dense_forward(Exec mode, const double* x, int n, int in_f,
                   const double* w, const double* b, int out_f, double* y);

void dense_backward_input(Exec mode, const double* dy, const double* w,
                          int n, int in_f, int out_f, double* dx);

void dense_backward_params(Exec mode, const double* x, const double* dy,
                           int n, int in_f, int out_f, double* dw, double* db);

// 2x2 max pooling, stride 2; h and w must be even. argmax records the flat
// input index of the winning element (first in scan order on ties) for the
// backward pass.
void maxpool2_forward(Exec mode, const double* x, int n, int c, int h, int w,
                      double* y, std::int32_t* argmax);

// dx must be zeroed by the caller.
void maxpool2_backward(Exec mode, const double* dy, const std::int32_t* argmax,
                       int n, int c, int h, int w, double* dx);

// Spatial global pooling down to one value per (sample, channel).
void global_avgpool_forward(Exec mode, const double* x, int n, int c, int hw, double* y);
void global_avgpool_backward(Exec mode, const double* dy, int n, int c, int hw, double* dx);
void global_maxpool_forward(Exec mode, const double* x, int n, int c, int hw,
                            double* y, std::int32_t* argmax);
void global_maxpool_backward(Exec mode, const double* dy, const std::int32_t* argmax,
                             int n, int c, int hw, double* dx);

}  // namespace uvcl::kernels
