#include "har/nn/network.hpp"

#include "har/error.hpp"
#include "har/simd/kernels.hpp"
#include "har/simd/reference.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace har::nn {

NetConfig NetConfig::full() {
    NetConfig c;
    c.width_base = 64;
    c.feature_dim = 1024;
    return c;
}

NetConfig NetConfig::tiny() { return NetConfig{}; }

int NetConfig::stage_length(int stage) const {
    int L = input_T;
    const int pad = kernel_size / 2;
    for (int s = 1; s <= stage; ++s) L = (L + 2 * pad - kernel_size) / 2 + 1;
    return L;
}

void NetConfig::validate() const {
    if (width_base < 1 || n_stages < 1 || blocks_per_stage < 1 || feature_dim < 1 || head_hidden < 1)
        throw ConfigError("network widths, stage and block counts must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be a positive odd integer");
    if (input_T < kernel_size) throw ConfigError("input_T shorter than the kernel");
    if (stage_length(n_stages - 1) < 1) throw ConfigError("too many stages for input_T");
    if (n_stages > 16) throw ConfigError("n_stages too large");
}

std::string_view head_name(Head h) {
    switch (h) {
    case Head::aot: return "aot";
    case Head::permutation: return "permutation";
    case Head::time_warp: return "time_warp";
    case Head::downstream: return "downstream";
    }
    return "?";
}

template <class T>
std::size_t ParamSet<T>::add(std::string name, std::vector<std::size_t> shape, bool trainable) {
    if (find(name)) throw InvariantError(fmt::format("duplicate parameter name {}", name));
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    Param<T> p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.value.assign(n, T(0));
    p.grad.assign(n, T(0));
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return params_.size() - 1;
}

template <class T>
std::optional<std::size_t> ParamSet<T>::find(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    return std::nullopt;
}

template <class T>
void ParamSet<T>::zero_grad() {
    for (auto& p : params_) {
        std::fill(p.grad.begin(), p.grad.end(), T(0));
        p.has_grad = false;
    }
}

template <class T>
std::size_t ParamSet<T>::trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_)
        if (p.trainable) n += p.size();
    return n;
}

template <class T>
Act<T> pack_windows(std::span<const SignalWindow> windows) {
    if (windows.empty()) return {};
    const std::size_t L = windows[0].length();
    Act<T> x(kChannels, windows.size(), L);
    for (std::size_t n = 0; n < windows.size(); ++n) {
        if (windows[n].length() != L) throw InputError("batch windows differ in length");
        for (int c = 0; c < kChannels; ++c)
            for (std::size_t t = 0; t < L; ++t) x.at(c, n, t) = static_cast<T>(windows[n].at(c, t));
    }
    return x;
}

template <class T>
std::vector<T> softmax_rows(std::span<const T> logits, std::size_t k) {
    std::vector<T> out(logits.size());
    for (std::size_t r = 0; r < logits.size() / k; ++r) {
        const T* z = logits.data() + r * k;
        const double mx = *std::max_element(z, z + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j]) - mx);
        for (std::size_t j = 0; j < k; ++j) out[r * k + j] = static_cast<T>(std::exp(static_cast<double>(z[j]) - mx) / s);
    }
    return out;
}

template <class T>
std::vector<int> argmax_rows(std::span<const T> logits, std::size_t k) {
    std::vector<int> out(logits.size() / k);
    for (std::size_t r = 0; r < out.size(); ++r) {
        const T* z = logits.data() + r * k;
        out[r] = static_cast<int>(std::max_element(z, z + k) - z);
    }
    return out;
}

namespace {

// Kernel access per precision: float goes through the runtime-dispatched
// SIMD table, double through the scalar reference.
template <class T>
struct Kern;

template <>
struct Kern<float> {
    static const simd::KernelTable& k() { return simd::active(); }
    static void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
                        const float* B, std::size_t ldb, float* C, std::size_t ldc, bool acc) {
        k().gemm_nn(M, N, K, A, lda, B, ldb, C, ldc, acc);
    }
    static void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
                        const float* B, std::size_t ldb, float* C, std::size_t ldc, bool acc) {
        k().gemm_tn(M, N, K, A, lda, B, ldb, C, ldc, acc);
    }
    static void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
                        const float* B, std::size_t ldb, float* C, std::size_t ldc, bool acc) {
        k().gemm_nt(M, N, K, A, lda, B, ldb, C, ldc, acc);
    }
    static void affine(const float* x, float a, float b, float* y, std::size_t n, bool relu) {
        k().affine(x, a, b, y, n, relu);
    }
    static void relu_backward(const float* y, const float* dy, float* dx, std::size_t n) {
        k().relu_backward(y, dy, dx, n);
    }
    static void add(const float* x, float* y, std::size_t n) { k().add(x, y, n); }
    static void moments(const float* x, std::size_t n, double c, double* s, double* ss) {
        k().moments(x, n, c, s, ss);
    }
    static void bn_reduce(const float* x, const float* dy, std::size_t n, float mean, double* s, double* sx) {
        k().bn_reduce(x, dy, n, mean, s, sx);
    }
    static void bn_apply(const float* x, const float* dy, std::size_t n, float mean, float k1, float k2,
                         float k3, float* dx, bool acc) {
        k().bn_apply(x, dy, n, mean, k1, k2, k3, dx, acc);
    }
};

template <>
struct Kern<double> {
    static constexpr auto gemm_nn = &simd::ref::gemm_nn<double>;
    static constexpr auto gemm_tn = &simd::ref::gemm_tn<double>;
    static constexpr auto gemm_nt = &simd::ref::gemm_nt<double>;
    static constexpr auto affine = &simd::ref::affine<double>;
    static constexpr auto relu_backward = &simd::ref::relu_backward<double>;
    static constexpr auto add = &simd::ref::add<double>;
    static constexpr auto moments = &simd::ref::moments<double>;
    static constexpr auto bn_reduce = &simd::ref::bn_reduce<double>;
    static constexpr auto bn_apply = &simd::ref::bn_apply<double>;
};

template <class T>
void im2col(const Act<T>& x, const ConvSpec& s, std::size_t Lout, std::vector<T>& col) {
    const std::size_t N = x.N, L = x.L, cols = N * Lout;
    col.resize(s.cin * s.k * cols);
    for (std::size_t ci = 0; ci < s.cin; ++ci) {
        for (std::size_t kk = 0; kk < s.k; ++kk) {
            T* dst = col.data() + (ci * s.k + kk) * cols;
            for (std::size_t n = 0; n < N; ++n) {
                const T* src = x.v.data() + (ci * N + n) * L;
                T* d = dst + n * Lout;
                for (std::size_t to = 0; to < Lout; ++to) {
                    const auto t = static_cast<std::ptrdiff_t>(to * s.stride + kk) - static_cast<std::ptrdiff_t>(s.pad);
                    d[to] = (t >= 0 && t < static_cast<std::ptrdiff_t>(L)) ? src[t] : T(0);
                }
            }
        }
    }
}

template <class T>
void col2im_add(const std::vector<T>& dcol, const ConvSpec& s, std::size_t Lout, Act<T>& dx) {
    const std::size_t N = dx.N, L = dx.L, cols = N * Lout;
    for (std::size_t ci = 0; ci < s.cin; ++ci) {
        for (std::size_t kk = 0; kk < s.k; ++kk) {
            const T* src = dcol.data() + (ci * s.k + kk) * cols;
            for (std::size_t n = 0; n < N; ++n) {
                T* d = dx.v.data() + (ci * N + n) * L;
                const T* sr = src + n * Lout;
                for (std::size_t to = 0; to < Lout; ++to) {
                    const auto t = static_cast<std::ptrdiff_t>(to * s.stride + kk) - static_cast<std::ptrdiff_t>(s.pad);
                    if (t >= 0 && t < static_cast<std::ptrdiff_t>(L)) d[t] += sr[to];
                }
            }
        }
    }
}

template <class T>
std::vector<T>& scratch(int slot) {
    thread_local std::vector<T> buffers[2];
    return buffers[slot];
}

template <class T>
Act<T> conv_forward(const Act<T>& x, const ConvSpec& s, const ParamSet<T>& P) {
    if (x.C != s.cin) throw InputError(fmt::format("conv expects {} input channels, got {}", s.cin, x.C));
    const std::size_t Lout = s.out_length(x.L);
    Act<T> y(s.cout, x.N, Lout);
    auto& col = scratch<T>(0);
    im2col(x, s, Lout, col);
    const std::size_t K = s.cin * s.k, cols = x.N * Lout;
    Kern<T>::gemm_nn(s.cout, cols, K, P[s.w].value.data(), K, col.data(), cols, y.v.data(), cols, false);
    return y;
}

template <class T>
void conv_backward(const Act<T>& x, const Act<T>& dy, const ConvSpec& s, ParamSet<T>& P, Act<T>* dx,
                   bool wgrad) {
    const std::size_t Lout = dy.L, K = s.cin * s.k, cols = x.N * Lout;
    if (wgrad) {
        auto& col = scratch<T>(0);
        im2col(x, s, Lout, col);
        Kern<T>::gemm_nt(s.cout, K, cols, dy.v.data(), cols, col.data(), cols, P[s.w].grad.data(), K, true);
        P[s.w].has_grad = true;
    }
    if (dx) {
        auto& dcol = scratch<T>(1);
        dcol.resize(K * cols);
        Kern<T>::gemm_tn(K, cols, s.cout, P[s.w].value.data(), K, dy.v.data(), cols, dcol.data(), cols, false);
        col2im_add(dcol, s, Lout, *dx);
    }
}

template <class T>
struct BnStats {
    std::vector<T> mean, inv;
};

template <class T>
Act<T> bn_forward(const Act<T>& x, const BnSpec& s, Mode mode, bool update_running, bool relu,
                  ParamSet<T>& P, BnStats<T>& st) {
    Act<T> y(x.C, x.N, x.L);
    const std::size_t m = x.cols();
    st.mean.resize(s.c);
    st.inv.resize(s.c);
    for (std::size_t c = 0; c < s.c; ++c) {
        double mean, var;
        if (mode == Mode::train) {
            double sum, ss;
            Kern<T>::moments(x.row(c), m, 0.0, &sum, &ss);
            mean = sum / static_cast<double>(m);
            Kern<T>::moments(x.row(c), m, mean, &sum, &ss);
            var = ss / static_cast<double>(m);
            if (update_running) {
                const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
                T& rm = P[s.mean].value[c];
                T& rv = P[s.var].value[c];
                rm = static_cast<T>((1.0 - kBnMomentum) * rm + kBnMomentum * mean);
                rv = static_cast<T>((1.0 - kBnMomentum) * rv + kBnMomentum * unbiased);
            }
        } else {
            mean = P[s.mean].value[c];
            var = P[s.var].value[c];
        }
        const double inv = 1.0 / std::sqrt(var + kBnEps);
        st.mean[c] = static_cast<T>(mean);
        st.inv[c] = static_cast<T>(inv);
        const double a = static_cast<double>(P[s.gamma].value[c]) * inv;
        const double b = static_cast<double>(P[s.beta].value[c]) - a * mean;
        Kern<T>::affine(x.row(c), static_cast<T>(a), static_cast<T>(b), y.row(c), m, relu);
    }
    return y;
}

// dz is the gradient w.r.t. the BN output (before any ReLU).
template <class T>
void bn_backward(const Act<T>& x, const Act<T>& dz, const BnSpec& s, const BnStats<T>& st, ParamSet<T>& P,
                 Act<T>& dx, bool accumulate) {
    const std::size_t m = x.cols();
    for (std::size_t c = 0; c < s.c; ++c) {
        double sdy, sdyxc;
        Kern<T>::bn_reduce(x.row(c), dz.row(c), m, st.mean[c], &sdy, &sdyxc);
        const double inv = st.inv[c];
        const double gamma = P[s.gamma].value[c];
        P[s.gamma].grad[c] += static_cast<T>(sdyxc * inv);
        P[s.beta].grad[c] += static_cast<T>(sdy);
        const double k1 = gamma * inv;
        const double k2 = sdy / static_cast<double>(m);
        const double k3 = inv * inv * sdyxc / static_cast<double>(m);
        Kern<T>::bn_apply(x.row(c), dz.row(c), m, st.mean[c], static_cast<T>(k1), static_cast<T>(k2),
                          static_cast<T>(k3), dx.row(c), accumulate);
    }
    P[s.gamma].has_grad = true;
    P[s.beta].has_grad = true;
}

template <class T>
Act<T> relu_grad(const Act<T>& y, const Act<T>& dy) {
    Act<T> dz(y.C, y.N, y.L);
    Kern<T>::relu_backward(y.v.data(), dy.v.data(), dz.v.data(), y.v.size());
    return dz;
}

template <class T>
std::vector<T> linear_forward(std::span<const T> F, std::size_t N, const LinearSpec& s, const ParamSet<T>& P) {
    std::vector<T> y(N * s.out);
    Kern<T>::gemm_nt(N, s.out, s.in, F.data(), s.in, P[s.w].value.data(), s.in, y.data(), s.out, false);
    const auto& b = P[s.b].value;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < s.out; ++j) y[n * s.out + j] += b[j];
    return y;
}

template <class T>
void linear_backward(std::span<const T> F, std::size_t N, std::span<const T> dy, const LinearSpec& s,
                     ParamSet<T>& P, std::vector<T>* dF) {
    Kern<T>::gemm_tn(s.out, s.in, N, dy.data(), s.out, F.data(), s.in, P[s.w].grad.data(), s.in, true);
    auto& gb = P[s.b].grad;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < s.out; ++j) gb[j] += dy[n * s.out + j];
    P[s.w].has_grad = true;
    P[s.b].has_grad = true;
    if (dF) Kern<T>::gemm_nn(N, s.in, s.out, dy.data(), s.out, P[s.w].value.data(), s.in, dF->data(), s.in, true);
}

template <class T>
struct BlockCache {
    Act<T> a1, h1, a2;
    BnStats<T> s1, s2;
};

template <class T>
struct TrunkCache {
    Act<T> stem_out;
    std::vector<BlockCache<T>> blocks;
    std::vector<Act<T>> outs;
    Act<T> af1, hf, af2;
    BnStats<T> sf1, sf2;
};

} // namespace

template <class T>
Network<T>::Network(const NetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const auto k = static_cast<std::size_t>(cfg.kernel_size);
    auto conv = [&](const std::string& name, std::size_t cin, std::size_t cout, std::size_t kk, std::size_t stride) {
        ConvSpec s;
        s.cin = cin;
        s.cout = cout;
        s.k = kk;
        s.stride = stride;
        s.pad = kk / 2;
        s.w = params_.add(name + ".w", {cout, cin, kk}, true);
        return s;
    };
    auto bn = [&](const std::string& name, std::size_t c) {
        BnSpec s;
        s.c = c;
        s.gamma = params_.add(name + ".gamma", {c}, true);
        s.beta = params_.add(name + ".beta", {c}, true);
        s.mean = params_.add(name + ".running_mean", {c}, false);
        s.var = params_.add(name + ".running_var", {c}, false);
        return s;
    };

    std::size_t cin = static_cast<std::size_t>(cfg.stage_channels(0));
    stem_ = conv("stem.conv", kChannels, cin, k, 1);
    for (int s = 0; s < cfg.n_stages; ++s) {
        const auto cout = static_cast<std::size_t>(cfg.stage_channels(s));
        for (int b = 0; b < cfg.blocks_per_stage; ++b) {
            const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
            const std::string prefix = fmt::format("s{}.b{}", s, b);
            BlockSpec blk;
            blk.stage = s;
            blk.bn1 = bn(prefix + ".bn1", cin);
            blk.conv1 = conv(prefix + ".conv1", cin, cout, k, stride);
            blk.bn2 = bn(prefix + ".bn2", cout);
            blk.conv2 = conv(prefix + ".conv2", cout, cout, k, 1);
            if (stride != 1 || cin != cout) blk.proj = conv(prefix + ".proj", cin, cout, 1, stride);
            blocks_.push_back(blk);
            cin = cout;
        }
    }
    const auto fd = static_cast<std::size_t>(cfg.feature_dim);
    final_bn1_ = bn("final.bn1", cin);
    final_conv_ = conv("final.conv", cin, fd, k, 1);
    final_bn2_ = bn("final.bn2", fd);
    trunk_params_ = params_.size();

    const char* names[kPretextHeadCount] = {"head.aot", "head.perm", "head.tw"};
    for (int h = 0; h < kPretextHeadCount; ++h) {
        LinearSpec s;
        s.in = fd;
        s.out = 2;
        s.w = params_.add(std::string(names[h]) + ".w", {2, fd}, true);
        s.b = params_.add(std::string(names[h]) + ".b", {2}, true);
        pretext_[h] = s;
    }
    head_params_end_ = params_.size();
}

namespace {

template <class T>
void fill_normal(std::vector<T>& v, double sd, Rng& rng) {
    for (auto& x : v) x = static_cast<T>(rng.normal() * sd);
}

} // namespace

template <class T>
Network<T> Network<T>::build(const NetConfig& cfg, Rng& rng) {
    Network<T> net(cfg);
    for (auto& p : net.params_) {
        const auto& n = p.name;
        auto ends_with = [&](std::string_view suffix) {
            return n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        if (ends_with(".gamma") || ends_with(".running_var")) {
            std::fill(p.value.begin(), p.value.end(), T(1));
        } else if (ends_with(".beta") || ends_with(".running_mean") || ends_with(".b")) {
            std::fill(p.value.begin(), p.value.end(), T(0));
        } else if (p.shape.size() == 3) {
            fill_normal(p.value, std::sqrt(2.0 / static_cast<double>(p.shape[1] * p.shape[2])), rng);
        } else if (p.shape.size() == 2) {
            fill_normal(p.value, std::sqrt(1.0 / static_cast<double>(p.shape[1])), rng);
        }
    }
    return net;
}

template <class T>
Network<T> Network<T>::skeleton(const NetConfig& cfg, int downstream_classes) {
    Network<T> net(cfg);
    if (downstream_classes > 0) {
        Rng dummy(0);
        net.attach_downstream(downstream_classes, dummy);
        for (std::size_t i = net.head_params_end_; i < net.params_.size(); ++i)
            std::fill(net.params_[i].value.begin(), net.params_[i].value.end(), T(0));
    }
    return net;
}

template <class T>
void Network<T>::attach_downstream(int n_classes, Rng& rng) {
    if (n_classes < 2) throw ConfigError("downstream head needs at least 2 classes");
    detach_downstream();
    const auto fd = static_cast<std::size_t>(cfg_.feature_dim);
    const auto hh = static_cast<std::size_t>(cfg_.head_hidden);
    const auto nc = static_cast<std::size_t>(n_classes);
    DownstreamSpec d;
    d.hidden = {fd, hh, params_.add("down.fc1.w", {hh, fd}, true), params_.add("down.fc1.b", {hh}, true)};
    d.out = {hh, nc, params_.add("down.fc2.w", {nc, hh}, true), params_.add("down.fc2.b", {nc}, true)};
    fill_normal(params_[d.hidden.w].value, std::sqrt(2.0 / static_cast<double>(fd)), rng);
    fill_normal(params_[d.out.w].value, std::sqrt(1.0 / static_cast<double>(hh)), rng);
    down_ = d;
}

template <class T>
void Network<T>::detach_downstream() {
    params_.truncate(head_params_end_);
    down_.reset();
}

template <class T>
int Network<T>::head_classes(Head h) const {
    if (h == Head::downstream) return downstream_classes();
    return 2;
}

template <class T>
std::size_t Network<T>::parameter_count(const NetConfig& cfg) {
    Network<T> net(cfg);
    const std::size_t fd = cfg.feature_dim, hh = cfg.head_hidden;
    return net.params_.trainable_scalars() + fd * hh + hh;
}

namespace {

template <class T>
std::vector<T> run_trunk(const Act<T>& x, Mode mode, bool update_running, ParamSet<T>& P, const NetConfig& cfg,
                         const ConvSpec& stem, const std::vector<BlockSpec>& blocks, const BnSpec& fbn1,
                         const ConvSpec& fconv, const BnSpec& fbn2, TrunkCache<T>& c) {
    if (x.C != kChannels || x.L != static_cast<std::size_t>(cfg.input_T))
        throw InputError(fmt::format("network expects {}x{} windows, got {}x{}", kChannels, cfg.input_T, x.C, x.L));
    c.stem_out = conv_forward(x, stem, P);
    c.blocks.resize(blocks.size());
    c.outs.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& spec = blocks[b];
        auto& bc = c.blocks[b];
        const Act<T>& xin = b == 0 ? c.stem_out : c.outs[b - 1];
        bc.a1 = bn_forward(xin, spec.bn1, mode, update_running, true, P, bc.s1);
        bc.h1 = conv_forward(bc.a1, spec.conv1, P);
        bc.a2 = bn_forward(bc.h1, spec.bn2, mode, update_running, true, P, bc.s2);
        Act<T> out = conv_forward(bc.a2, spec.conv2, P);
        if (spec.proj) {
            const Act<T> sc = conv_forward(bc.a1, *spec.proj, P);
            Kern<T>::add(sc.v.data(), out.v.data(), out.v.size());
        } else {
            Kern<T>::add(xin.v.data(), out.v.data(), out.v.size());
        }
        c.outs[b] = std::move(out);
    }
    c.af1 = bn_forward(c.outs.back(), fbn1, mode, update_running, true, P, c.sf1);
    c.hf = conv_forward(c.af1, fconv, P);
    c.af2 = bn_forward(c.hf, fbn2, mode, update_running, true, P, c.sf2);

    const std::size_t N = x.N, L = c.af2.L, fd = c.af2.C;
    std::vector<T> feats(N * fd);
    for (std::size_t ch = 0; ch < fd; ++ch)
        for (std::size_t n = 0; n < N; ++n) {
            double s = 0.0;
            const T* r = c.af2.v.data() + (ch * N + n) * L;
            for (std::size_t t = 0; t < L; ++t) s += r[t];
            feats[n * fd + ch] = static_cast<T>(s / static_cast<double>(L));
        }
    return feats;
}

template <class T>
void trunk_backward(const Act<T>& x, TrunkCache<T>& c, std::span<const T> dF, ParamSet<T>& P,
                    const ConvSpec& stem, const std::vector<BlockSpec>& blocks, const BnSpec& fbn1,
                    const ConvSpec& fconv, const BnSpec& fbn2) {
    const std::size_t N = x.N, L = c.af2.L, fd = c.af2.C;
    Act<T> daf2(fd, N, L);
    for (std::size_t ch = 0; ch < fd; ++ch)
        for (std::size_t n = 0; n < N; ++n) {
            const T g = dF[n * fd + ch] / static_cast<T>(L);
            T* r = daf2.v.data() + (ch * N + n) * L;
            for (std::size_t t = 0; t < L; ++t) r[t] = g;
        }
    Act<T> dz = relu_grad(c.af2, daf2);
    Act<T> dhf(c.hf.C, N, c.hf.L);
    bn_backward(c.hf, dz, fbn2, c.sf2, P, dhf, false);
    Act<T> daf1(c.af1.C, N, c.af1.L);
    conv_backward(c.af1, dhf, fconv, P, &daf1, true);
    dz = relu_grad(c.af1, daf1);
    Act<T> dout(c.outs.back().C, N, c.outs.back().L);
    bn_backward(c.outs.back(), dz, fbn1, c.sf1, P, dout, false);

    for (std::size_t bi = blocks.size(); bi-- > 0;) {
        const auto& spec = blocks[bi];
        auto& bc = c.blocks[bi];
        const Act<T>& xin = bi == 0 ? c.stem_out : c.outs[bi - 1];
        Act<T> da2(bc.a2.C, N, bc.a2.L);
        conv_backward(bc.a2, dout, spec.conv2, P, &da2, true);
        Act<T> dz2 = relu_grad(bc.a2, da2);
        Act<T> dh1(bc.h1.C, N, bc.h1.L);
        bn_backward(bc.h1, dz2, spec.bn2, bc.s2, P, dh1, false);
        Act<T> da1(bc.a1.C, N, bc.a1.L);
        conv_backward(bc.a1, dh1, spec.conv1, P, &da1, true);
        Act<T> dxin;
        if (spec.proj) {
            conv_backward(bc.a1, dout, *spec.proj, P, &da1, true);
            dxin = Act<T>(xin.C, N, xin.L);
        } else {
            dxin = std::move(dout);
        }
        Act<T> dz1 = relu_grad(bc.a1, da1);
        bn_backward(xin, dz1, spec.bn1, bc.s1, P, dxin, true);
        dout = std::move(dxin);
        // Cached activations of this block are no longer needed.
        bc = BlockCache<T>{};
    }
    conv_backward<T>(x, dout, stem, P, nullptr, true);
}

void check_labels(const std::vector<int>& y, std::size_t N, int classes, Head h) {
    if (y.size() != N)
        throw InputError(fmt::format("{} head: {} labels for batch of {}", head_name(h), y.size(), N));
    for (int v : y)
        if (v < 0 || v >= classes)
            throw InputError(fmt::format("{} head: label {} out of range [0, {})", head_name(h), v, classes));
}

} // namespace

template <class T>
ForwardOutput<T> Network<T>::forward(const Act<T>& x, Mode mode, std::span<const Head> heads) {
    TrunkCache<T> cache;
    ForwardOutput<T> out;
    out.N = x.N;
    out.features = run_trunk(x, mode, mode == Mode::train, params_, cfg_, stem_, blocks_, final_bn1_,
                             final_conv_, final_bn2_, cache);
    for (Head h : heads) out.logits[static_cast<int>(h)] = head_logits(h, out.features, x.N);
    return out;
}

template <class T>
std::vector<T> Network<T>::features(const Act<T>& x) {
    constexpr std::size_t kChunk = 256;
    const std::size_t fd = static_cast<std::size_t>(cfg_.feature_dim);
    std::vector<T> out(x.N * fd);
    for (std::size_t n0 = 0; n0 < x.N; n0 += kChunk) {
        const std::size_t nb = std::min(kChunk, x.N - n0);
        Act<T> part(x.C, nb, x.L);
        for (std::size_t c = 0; c < x.C; ++c)
            std::copy_n(x.v.data() + (c * x.N + n0) * x.L, nb * x.L, part.v.data() + c * nb * x.L);
        TrunkCache<T> cache;
        const auto f = run_trunk(part, Mode::eval, false, params_, cfg_, stem_, blocks_, final_bn1_, final_conv_,
                                 final_bn2_, cache);
        std::copy(f.begin(), f.end(), out.begin() + n0 * fd);
    }
    return out;
}

template <class T>
std::vector<T> Network<T>::head_logits(Head h, std::span<const T> feats, std::size_t N) const {
    if (h == Head::downstream) {
        if (!down_) throw InvariantError("downstream head is not attached");
        auto hid = linear_forward<T>(feats, N, down_->hidden, params_);
        for (auto& v : hid) v = v > T(0) ? v : T(0);
        return linear_forward<T>(hid, N, down_->out, params_);
    }
    return linear_forward<T>(feats, N, pretext_[static_cast<int>(h)], params_);
}

namespace {

// Cross-entropy of one head; writes scaled dlogits and returns mean loss.
template <class T>
double cross_entropy(std::span<const T> logits, std::size_t N, std::size_t k, const std::vector<int>& y,
                     double scale, std::vector<T>& dlogits) {
    dlogits.assign(N * k, T(0));
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const T* z = logits.data() + n * k;
        const double mx = *std::max_element(z, z + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j]) - mx);
        const double lse = mx + std::log(s);
        total += lse - static_cast<double>(z[y[n]]);
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(z[j]) - lse);
            dlogits[n * k + j] = static_cast<T>(scale * (p - (static_cast<int>(j) == y[n] ? 1.0 : 0.0)));
        }
    }
    return total / static_cast<double>(N);
}

} // namespace

template <class T>
LossResult<T> Network<T>::head_pass(std::span<const T> feats, std::size_t N, const HeadLabels& labels,
                                    std::vector<T>* dF) {
    LossResult<T> r;
    r.out.N = N;
    r.out.features.assign(feats.begin(), feats.end());
    int active = 0;
    for (int h = 0; h < kHeadCount; ++h)
        if (!labels[h].empty()) {
            if (h == static_cast<int>(Head::downstream) && !down_)
                throw InvariantError("downstream labels given but no downstream head attached");
            check_labels(labels[h], N, head_classes(static_cast<Head>(h)), static_cast<Head>(h));
            ++active;
        }
    if (active == 0) throw InputError("no active heads");
    const double scale = 1.0 / (static_cast<double>(N) * active);
    std::vector<T> dlog;
    for (int hi = 0; hi < kHeadCount; ++hi) {
        if (labels[hi].empty()) continue;
        const Head h = static_cast<Head>(hi);
        const auto k = static_cast<std::size_t>(head_classes(h));
        if (h == Head::downstream) {
            auto hid = linear_forward<T>(feats, N, down_->hidden, params_);
            for (auto& v : hid) v = v > T(0) ? v : T(0);
            r.out.logits[hi] = linear_forward<T>(hid, N, down_->out, params_);
            r.head_loss[hi] = cross_entropy<T>(r.out.logits[hi], N, k, labels[hi], scale, dlog);
            std::vector<T> dhid(N * down_->hidden.out, T(0));
            linear_backward<T>(hid, N, dlog, down_->out, params_, &dhid);
            for (std::size_t i = 0; i < hid.size(); ++i)
                if (!(hid[i] > T(0))) dhid[i] = T(0);
            linear_backward<T>(feats, N, dhid, down_->hidden, params_, dF);
        } else {
            r.out.logits[hi] = linear_forward<T>(feats, N, pretext_[hi], params_);
            r.head_loss[hi] = cross_entropy<T>(r.out.logits[hi], N, k, labels[hi], scale, dlog);
            linear_backward<T>(feats, N, dlog, pretext_[hi], params_, dF);
        }
        r.loss += r.head_loss[hi] / active;
    }
    return r;
}

template <class T>
LossResult<T> Network<T>::head_loss_and_grad(std::span<const T> feats, std::size_t N, const HeadLabels& labels) {
    params_.zero_grad();
    auto r = head_pass(feats, N, labels, nullptr);
    if (hook_) hook_(params_);
    return r;
}

template <class T>
LossResult<T> Network<T>::loss_and_grad(const Act<T>& x, const HeadLabels& labels, bool train_trunk) {
    params_.zero_grad();
    TrunkCache<T> cache;
    const Mode mode = train_trunk ? Mode::train : Mode::eval;
    const auto feats = run_trunk(x, mode, train_trunk, params_, cfg_, stem_, blocks_, final_bn1_, final_conv_,
                                 final_bn2_, cache);
    if (!train_trunk) {
        auto r = head_pass(feats, x.N, labels, nullptr);
        if (hook_) hook_(params_);
        return r;
    }
    std::vector<T> dF(feats.size(), T(0));
    auto r = head_pass(feats, x.N, labels, &dF);
    trunk_backward<T>(x, cache, dF, params_, stem_, blocks_, final_bn1_, final_conv_, final_bn2_);
    if (hook_) hook_(params_);
    return r;
}

template <class T>
double Network<T>::loss(const Act<T>& x, const HeadLabels& labels, Mode mode) {
    TrunkCache<T> cache;
    const auto feats = run_trunk(x, mode, false, params_, cfg_, stem_, blocks_, final_bn1_, final_conv_,
                                 final_bn2_, cache);
    int active = 0;
    for (int h = 0; h < kHeadCount; ++h)
        if (!labels[h].empty()) {
            check_labels(labels[h], x.N, head_classes(static_cast<Head>(h)), static_cast<Head>(h));
            ++active;
        }
    if (active == 0) throw InputError("no active heads");
    if (track_pattern_) {
        std::uint64_t hsh = 1469598103934665603ull;
        auto mix = [&](const std::vector<T>& v) {
            for (T a : v) hsh = (hsh ^ (a > T(0) ? 1u : 0u)) * 1099511628211ull;
        };
        for (const auto& b : cache.blocks) {
            mix(b.a1.v);
            mix(b.a2.v);
        }
        mix(cache.af1.v);
        mix(cache.af2.v);
        if (down_ && !labels[static_cast<int>(Head::downstream)].empty())
            mix(linear_forward<T>(feats, x.N, down_->hidden, params_));
        pattern_ = hsh;
    }
    double total = 0.0;
    std::vector<T> dlog;
    for (int h = 0; h < kHeadCount; ++h) {
        if (labels[h].empty()) continue;
        const auto logits = head_logits(static_cast<Head>(h), feats, x.N);
        total += cross_entropy<T>(logits, x.N, static_cast<std::size_t>(head_classes(static_cast<Head>(h))),
                                  labels[h], 0.0, dlog);
    }
    return total / active;
}

template <class T>
template <class U>
Network<U> Network<T>::cast() const {
    Network<U> out = Network<U>::skeleton(cfg_, downstream_classes());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& src = params_[i];
        auto& dst = out.params_[i];
        std::transform(src.value.begin(), src.value.end(), dst.value.begin(),
                       [](T v) { return static_cast<U>(v); });
        dst.trainable = src.trainable;
    }
    return out;
}

template class Network<float>;
template class Network<double>;
template class ParamSet<float>;
template class ParamSet<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;
template Act<float> pack_windows<float>(std::span<const SignalWindow>);
template Act<double> pack_windows<double>(std::span<const SignalWindow>);
template std::vector<float> softmax_rows<float>(std::span<const float>, std::size_t);
template std::vector<double> softmax_rows<double>(std::span<const double>, std::size_t);
template std::vector<int> argmax_rows<float>(std::span<const float>, std::size_t);
template std::vector<int> argmax_rows<double>(std::span<const double>, std::size_t);

} // namespace har::nn
