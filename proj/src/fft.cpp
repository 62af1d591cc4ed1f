#include "har/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace har::fft {

namespace {

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct Buffer {
    void* ptr;
    explicit Buffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {}
    ~Buffer() { fftw_free(ptr); }
    Buffer(const Buffer&) = delete;
    Buffer& operator=(const Buffer&) = delete;
};

enum class Kind { r2c, c2c_forward, c2c_backward };

std::mutex g_plan_mutex;
std::map<std::tuple<Kind, std::size_t>, Plan> g_plans;

fftw_plan plan_for(Kind kind, std::size_t n) {
    std::lock_guard lock(g_plan_mutex);
    auto key = std::make_tuple(kind, n);
    if (auto it = g_plans.find(key); it != g_plans.end()) return it->second.get();
    // Plan on scratch arrays; FFTW_ESTIMATE never touches their contents
    // and yields the same plan on every run.
    Buffer in(sizeof(fftw_complex) * (n + 1)), out(sizeof(fftw_complex) * (n + 1));
    const int ni = static_cast<int>(n);
    fftw_plan p = nullptr;
    switch (kind) {
    case Kind::r2c:
        p = fftw_plan_dft_r2c_1d(ni, static_cast<double*>(in.ptr), static_cast<fftw_complex*>(out.ptr),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        break;
    case Kind::c2c_forward:
    case Kind::c2c_backward:
        p = fftw_plan_dft_1d(ni, static_cast<fftw_complex*>(in.ptr), static_cast<fftw_complex*>(out.ptr),
                             kind == Kind::c2c_forward ? FFTW_FORWARD : FFTW_BACKWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
        break;
    }
    return g_plans.emplace(key, Plan(p)).first->second.get();
}

std::vector<std::complex<double>> run_c2c(std::span<const std::complex<double>> x, Kind kind) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> in(x.begin(), x.end()), out(n);
    if (n == 0) return out;
    fftw_execute_dft(plan_for(kind, n), reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

} // namespace

std::vector<std::complex<double>> forward_real(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    if (n == 0) return {};
    fftw_execute_dft_r2c(plan_for(Kind::r2c, n), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x) {
    return run_c2c(x, Kind::c2c_forward);
}

std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> X) {
    auto out = run_c2c(X, Kind::c2c_backward);
    const double scale = X.empty() ? 1.0 : 1.0 / static_cast<double>(X.size());
    for (auto& v : out) v *= scale;
    return out;
}

} // namespace har::fft
