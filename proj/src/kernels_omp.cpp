// OpenMP kernels. Parallelism is only ever over disjoint output slices and the
// per-element accumulation order matches the serial reference exactly, so both
// builds produce bitwise-identical results (asserted in tests/unit/kernels).

#include "uvcl/kernels.hpp"

namespace uvcl::kernels::detail {

void conv2d_forward_omp(const double* x, int n, int c, int h, int w,
                        const double* weights, int oc, int ks, int pad,
                        const double* bias, double* y) {
    const int oh = h + 2 * pad - ks + 1;
    const int ow = w + 2 * pad - ks + 1;
#pragma omp parallel for schedule(static)
    for (int io = 0; io < n * oc; ++io) {
        const int i = io / oc;
        const int o = io % oc;
        double* yp = y + (static_cast<std::int64_t>(i) * oc + o) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias ? bias[o] : 0.0;
                for (int ic = 0; ic < c; ++ic) {
                    const double* xp = x + (static_cast<std::int64_t>(i) * c + ic) * h * w;
                    const double* wp = weights + ((static_cast<std::int64_t>(o) * c + ic) * ks) * ks;
                    for (int ky = 0; ky < ks; ++ky) {
                        const int iy = oy - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < ks; ++kx) {
                            const int ix = ox - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += xp[iy * w + ix] * wp[ky * ks + kx];
                        }
                    }
                }
                yp[oy * ow + ox] = acc;
            }
        }
    }
}

void conv2d_backward_input_omp(const double* dy, const double* weights,
                               int n, int c, int h, int w, int oc, int ks, int pad,
                               double* dx) {
    const int oh = h + 2 * pad - ks + 1;
    const int ow = w + 2 * pad - ks + 1;
#pragma omp parallel for schedule(static)
    for (int ii = 0; ii < n * c; ++ii) {
        const int i = ii / c;
        const int ic = ii % c;
        double* dxp = dx + (static_cast<std::int64_t>(i) * c + ic) * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                double acc = 0.0;
                for (int o = 0; o < oc; ++o) {
                    const double* dyp = dy + (static_cast<std::int64_t>(i) * oc + o) * oh * ow;
                    const double* wp = weights + ((static_cast<std::int64_t>(o) * c + ic) * ks) * ks;
                    for (int ky = 0; ky < ks; ++ky) {
                        const int oy = iy + pad - ky;
                        if (oy < 0 || oy >= oh) continue;
                        for (int kx = 0; kx < ks; ++kx) {
                            const int ox = ix + pad - kx;
                            if (ox < 0 || ox >= ow) continue;
                            acc += dyp[oy * ow + ox] * wp[ky * ks + kx];
                        }
                    }
                }
                dxp[iy * w + ix] = acc;
            }
        }
    }
}

void conv2d_backward_params_omp(const double* x, const double* dy,
                                int n, int c, int h, int w, int oc, int ks, int pad,
                                double* dw, double* db) {
    const int oh = h + 2 * pad - ks + 1;
    const int ow = w + 2 * pad - ks + 1;
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        for (int ic = 0; ic < c; ++ic) {
            for (int ky = 0; ky < ks; ++ky) {
                for (int kx = 0; kx < ks; ++kx) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const double* xp = x + (static_cast<std::int64_t>(i) * c + ic) * h * w;
                        const double* dyp = dy + (static_cast<std::int64_t>(i) * oc + o) * oh * ow;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox - pad + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += xp[iy * w + ix] * dyp[oy * ow + ox];
                            }
                        }
                    }
                    dw[((static_cast<std::int64_t>(o) * c + ic) * ks + ky) * ks + kx] += acc;
                }
            }
        }
        if (db) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* dyp = dy + (static_cast<std::int64_t>(i) * oc + o) * oh * ow;
                for (int e = 0; e < oh * ow; ++e) acc += dyp[e];
            }
            db[o] += acc;
        }
    }
}

void dense_forward_omp(const double* x, int n, int in_f,
                       const double* w, const double* b, int out_f, double* y) {
#pragma omp parallel for schedule(static)
    for (int io = 0; io < n * out_f; ++io) {
        const int i = io / out_f;
        const int o = io % out_f;
        double acc = b ? b[o] : 0.0;
        const double* xp = x + static_cast<std::int64_t>(i) * in_f;
        const double* wp = w + static_cast<std::int64_t>(o) * in_f;
        for (int j = 0; j < in_f; ++j) acc += xp[j] * wp[j];
        y[static_cast<std::int64_t>(i) * out_f + o] = acc;
    }
}

void dense_backward_input_omp(const double* dy, const double* w,
                              int n, int in_f, int out_f, double* dx) {
#pragma omp parallel for schedule(static)
    for (int ij = 0; ij < n * in_f; ++ij) {
        const int i = ij / in_f;
        const int j = ij % in_f;
        double acc = 0.0;
        const double* dyp = dy + static_cast<std::int64_t>(i) * out_f;
        for (int o = 0; o < out_f; ++o) acc += dyp[o] * w[static_cast<std::int64_t>(o) * in_f + j];
        dx[static_cast<std::int64_t>(i) * in_f + j] = acc;
    }
}

void dense_backward_params_omp(const double* x, const double* dy,
                               int n, int in_f, int out_f, double* dw, double* db) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_f; ++o) {
        for (int j = 0; j < in_f; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += dy[static_cast<std::int64_t>(i) * out_f + o] * x[static_cast<std::int64_t>(i) * in_f + j];
            }
            dw[static_cast<std::int64_t>(o) * in_f + j] += acc;
        }
        if (db) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += dy[static_cast<std::int64_t>(i) * out_f + o];
            db[o] += acc;
        }
    }
}

void maxpool2_forward_omp(const double* x, int n, int c, int h, int w,
                          double* y, std::int32_t* argmax) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const double* xp = x + static_cast<std::int64_t>(ic) * h * w;
        double* yp = y + static_cast<std::int64_t>(ic) * oh * ow;
        std::int32_t* ap = argmax + static_cast<std::int64_t>(ic) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                int best = (2 * oy) * w + 2 * ox;
                double bv = xp[best];
                const int cand[3] = {(2 * oy) * w + 2 * ox + 1, (2 * oy + 1) * w + 2 * ox,
                                     (2 * oy + 1) * w + 2 * ox + 1};
                for (int k = 0; k < 3; ++k) {
                    if (xp[cand[k]] > bv) {
                        bv = xp[cand[k]];
                        best = cand[k];
                    }
                }
                yp[oy * ow + ox] = bv;
                ap[oy * ow + ox] = best;
            }
        }
    }
}

void maxpool2_backward_omp(const double* dy, const std::int32_t* argmax,
                           int n, int c, int h, int w, double* dx) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const double* dyp = dy + static_cast<std::int64_t>(ic) * oh * ow;
        const std::int32_t* ap = argmax + static_cast<std::int64_t>(ic) * oh * ow;
        double* dxp = dx + static_cast<std::int64_t>(ic) * h * w;
        for (int e = 0; e < oh * ow; ++e) dxp[ap[e]] += dyp[e];
    }
}

void global_avgpool_forward_omp(const double* x, int n, int c, int hw, double* y) {
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const double* xp = x + static_cast<std::int64_t>(ic) * hw;
        double acc = 0.0;
        for (int e = 0; e < hw; ++e) acc += xp[e];
        y[ic] = acc / hw;
    }
}

void global_avgpool_backward_omp(const double* dy, int n, int c, int hw, double* dx) {
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const double g = dy[ic] / hw;
        double* dxp = dx + static_cast<std::int64_t>(ic) * hw;
        for (int e = 0; e < hw; ++e) dxp[e] += g;
    }
}

void global_maxpool_forward_omp(const double* x, int n, int c, int hw,
                                double* y, std::int32_t* argmax) {
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const double* xp = x + static_cast<std::int64_t>(ic) * hw;
        int best = 0;
        for (int e = 1; e < hw; ++e) {
            if (xp[e] > xp[best]) best = e;
        }
        y[ic] = xp[best];
        argmax[ic] = best;
    }
}

void global_maxpool_backward_omp(const double* dy, const std::int32_t* argmax,
                                 int n, int c, int hw, double* dx) {
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        dx[static_cast<std::int64_t>(ic) * hw + argmax[ic]] += dy[ic];
    }
}

}  // namespace uvcl::kernels::detail
