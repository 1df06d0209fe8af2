#include "uvcl/kernels.hpp"

namespace uvcl::kernels {

namespace detail {
void conv2d_forward_serial(const double*, int, int, int, int, const double*, int, int, int, const double*, double*);
void conv2d_backward_input_serial(const double*, const double*, int, int, int, int, int, int, int, double*);
void conv2d_backward_params_serial(const double*, const double*, int, int, int, int, int, int, int, double*, double*);
void dense_forward_serial(const double*, int, int, const double*, const double*, int, double*);
void dense_backward_input_serial(const double*, const double*, int, int, int, double*);
void dense_backward_params_serial(const double*, const double*, int, int, int, double*, double*);
void maxpool2_forward_serial(const double*, int, int, int, int, double*, std::int32_t*);
void maxpool2_backward_serial(const double*, const std::int32_t*, int, int, int, int, double*);
void global_avgpool_forward_serial(const double*, int, int, int, double*);
void global_avgpool_backward_serial(const double*, int, int, int, double*);
void global_maxpool_forward_serial(const double*, int, int, int, double*, std::int32_t*);
void global_maxpool_backward_serial(const double*, const std::int32_t*, int, int, int, double*);

void conv2d_forward_omp(const double*, int, int, int, int, const double*, int, int, int, const double*, double*);
void conv2d_backward_input_omp(const double*, const double*, int, int, int, int, int, int, int, double*);
void conv2d_backward_params_omp(const double*, const double*, int, int, int, int, int, int, int, double*, double*);
void dense_forward_omp(const double*, int, int, const double*, const double*, int, double*);
void dense_backward_input_omp(const double*, const double*, int, int, int, double*);
void dense_backward_params_omp(const double*, const double*, int, int, int, double*, double*);
void maxpool2_forward_omp(const double*, int, int, int, int, double*, std::int32_t*);
void maxpool2_backward_omp(const double*, const std::int32_t*, int, int, int, int, double*);
void global_avgpool_forward_omp(const double*, int, int, int, double*);
void global_avgpool_backward_omp(const double*, int, int, int, double*);
void global_maxpool_forward_omp(const double*, int, int, int, double*, std::int32_t*);
void global_maxpool_backward_omp(const double*, const std::int32_t*, int, int, int, double*);
}  // namespace detail

Exec& default_exec() {
    static Exec mode = Exec::Parallel;
    return mode;
}

void conv2d_forward(Exec mode, const double* x, int n, int c, int h, int w,
                    const double* weights, int oc, int ks, int pad,
                    const double* bias, double* y) {
    if (mode == Exec::Serial)
        detail::conv2d_forward_serial(x, n, c, h, w, weights, oc, ks, pad, bias, y);
    else
        detail::conv2d_forward_omp(x, n, c, h, w, weights, oc, ks, pad, bias, y);
}

void conv2d_backward_input(Exec mode, const double* dy, const double* weights,
                           int n, int c, int h, int w, int oc, int ks, int pad, double* dx) {
    if (mode == Exec::Serial)
        detail::conv2d_backward_input_serial(dy, weights, n, c, h, w, oc, ks, pad, dx);
    else
        detail::conv2d_backward_input_omp(dy, weights, n, c, h, w, oc, ks, pad, dx);
}

void conv2d_backward_params(Exec mode, const double* x, const double* dy,
                            int n, int c, int h, int w, int oc, int ks, int pad,
                            double* dw, double* db) {
    if (mode == Exec::Serial)
        detail::conv2d_backward_params_serial(x, dy, n, c, h, w, oc, ks, pad, dw, db);
    else
        detail::conv2d_backward_params_omp(x, dy, n, c, h, w, oc, ks, pad, dw, db);
}

void dense_forward(Exec mode, const double* x, int n, int in_f,
                   const double* w, const double* b, int out_f, double* y) {
    if (mode == Exec::Serial)
        detail::dense_forward_serial(x, n, in_f, w, b, out_f, y);
    else
        detail::dense_forward_omp(x, n, in_f, w, b, out_f, y);
}

void dense_backward_input(Exec mode, const double* dy, const double* w,
                          int n, int in_f, int out_f, double* dx) {
    if (mode == Exec::Serial)
        detail::dense_backward_input_serial(dy, w, n, in_f, out_f, dx);
    else
        detail::dense_backward_input_omp(dy, w, n, in_f, out_f, dx);
}

void dense_backward_params(Exec mode, const double* x, const double* dy,
                           int n, int in_f, int out_f, double* dw, double* db) {
    if (mode == Exec::Serial)
        detail::dense_backward_params_serial(x, dy, n, in_f, out_f, dw, db);
    else
        detail::dense_backward_params_omp(x, dy, n, in_f, out_f, dw, db);
}

void maxpool2_forward(Exec mode, const double* x, int n, int c, int h, int w,
                      double* y, std::int32_t* argmax) {
    if (mode == Exec::Serial)
        detail::maxpool2_forward_serial(x, n, c, h, w, y, argmax);
    else
        detail::maxpool2_forward_omp(x, n, c, h, w, y, argmax);
}

void maxpool2_backward(Exec mode, const double* dy, const std::int32_t* argmax,
                       int n, int c, int h, int w, double* dx) {
    if (mode == Exec::Serial)
        detail::maxpool2_backward_serial(dy, argmax, n, c, h, w, dx);
    else
        detail::maxpool2_backward_omp(dy, argmax, n, c, h, w, dx);
}

void global_avgpool_forward(Exec mode, const double* x, int n, int c, int hw, double* y) {
    if (mode == Exec::Serial)
        detail::global_avgpool_forward_serial(x, n, c, hw, y);
    else
        detail::global_avgpool_forward_omp(x, n, c, hw, y);
}

void global_avgpool_backward(Exec mode, const double* dy, int n, int c, int hw, double* dx) {
    if (mode == Exec::Serial)
        detail::global_avgpool_backward_serial(dy, n, c, hw, dx);
    else
        detail::global_avgpool_backward_omp(dy, n, c, hw, dx);
}

void global_maxpool_forward(Exec mode, const double* x, int n, int c, int hw,
                            double* y, std::int32_t* argmax) {
    if (mode == Exec::Serial)
        detail::global_maxpool_forward_serial(x, n, c, hw, y, argmax);
    else
        detail::global_maxpool_forward_omp(x, n, c, hw, y, argmax);
}

void global_maxpool_backward(Exec mode, const double* dy, const std::int32_t* argmax,
                             int n, int c, int hw, double* dx) {
    if (mode == Exec::Serial)
        detail::global_maxpool_backward_serial(dy, argmax, n, c, hw, dx);
    else
        detail::global_maxpool_backward_omp(dy, argmax, n, c, hw, dx);
}

}  // namespace uvcl::kernels
