// Times the serial and OpenMP kernel paths on convolution and dense layers.
// Not part of the test suite; numbers depend on the machine and thread count.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "uvcl/core.hpp"
#include "uvcl/kernels.hpp"

using uvcl::Rng;
using uvcl::kernels::Exec;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

template <typename F>
double time_ms(int reps, F&& f) {
    // One warm-up rep, then the median-free simple mean.
    f();
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name.c_str(),
                serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
    Rng rng(7);

    {
        const int n = 32, c = 8, h = 32, w = 32, oc = 16, ks = 3, pad = 1;
        auto x = random_vec(static_cast<std::size_t>(n) * c * h * w, rng);
        auto wt = random_vec(static_cast<std::size_t>(oc) * c * ks * ks, rng);
        auto b = random_vec(oc, rng);
        std::vector<double> y(static_cast<std::size_t>(n) * oc * h * w);
        auto run = [&](Exec e) {
            uvcl::kernels::conv2d_forward(e, x.data(), n, c, h, w, wt.data(), oc, ks, pad, b.data(),
                                          y.data());
        };
        report("conv2d 32x8x32x32 -> 16ch",
               time_ms(10, [&] { run(Exec::Serial); }),
               time_ms(10, [&] { run(Exec::Parallel); }));

        std::vector<double> dy = random_vec(y.size(), rng);
        std::vector<double> dx(x.size());
        auto run_bwd = [&](Exec e) {
            std::fill(dx.begin(), dx.end(), 0.0);
            uvcl::kernels::conv2d_backward_input(e, dy.data(), wt.data(), n, c, h, w, oc, ks, pad,
                                                 dx.data());
        };
        report("conv2d backward input",
               time_ms(10, [&] { run_bwd(Exec::Serial); }),
               time_ms(10, [&] { run_bwd(Exec::Parallel); }));
    }

    {
        const int n = 256, in_f = 512, out_f = 512;
        auto x = random_vec(static_cast<std::size_t>(n) * in_f, rng);
        auto wt = random_vec(static_cast<std::size_t>(out_f) * in_f, rng);
        auto b = random_vec(out_f, rng);
        std::vector<double> y(static_cast<std::size_t>(n) * out_f);
        auto run = [&](Exec e) {
            uvcl::kernels::dense_forward(e, x.data(), n, in_f, wt.data(), b.data(), out_f,
                                         y.data());
        };
        report("dense 256x512 -> 512",
               time_ms(20, [&] { run(Exec::Serial); }),
               time_ms(20, [&] { run(Exec::Parallel); }));
    }

    return 0;
}
