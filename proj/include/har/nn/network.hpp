#pragma once

#include "har/rng.hpp"
#include "har/signal.hpp"

#include <array>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace har::nn {

/// Layer table of the 1D pre-activation residual trunk.
///
/// stem conv (k, stride 1) -> n_stages x blocks_per_stage residual blocks
/// (BN-ReLU-conv-BN-ReLU-conv, channels width_base * 2^stage, stride 2 on
/// the first block of every stage after the first, 1x1 projection shortcut
/// when the shape changes) -> BN-ReLU -> final conv to feature_dim ->
/// BN-ReLU -> global average pool over time.
struct NetConfig {
    int width_base = 8;
    int n_stages = 4;
    int blocks_per_stage = 2;
    int feature_dim = 64;
    int kernel_size = 5;
    int input_T = kCanonicalLength;
    int head_hidden = 512;

    static NetConfig full();
    static NetConfig tiny();

    int stage_channels(int stage) const { return width_base << stage; }
    /// Temporal length after `stage` (0-based).
    int stage_length(int stage) const;
    void validate() const;

    bool operator==(const NetConfig&) const = default;
};

enum class Mode { train, eval };

enum class Head : int { aot = 0, permutation = 1, time_warp = 2, downstream = 3 };
inline constexpr int kHeadCount = 4;
inline constexpr int kPretextHeadCount = 3;
std::string_view head_name(Head h);

template <class T>
struct Param {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool trainable = true;
    bool has_grad = false;

    std::size_t size() const noexcept { return value.size(); }
};

template <class T>
class ParamSet {
public:
    std::size_t add(std::string name, std::vector<std::size_t> shape, bool trainable);
    Param<T>& operator[](std::size_t i) { return params_[i]; }
    const Param<T>& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const noexcept { return params_.size(); }
    std::optional<std::size_t> find(std::string_view name) const;
    void zero_grad();
    void truncate(std::size_t n) { params_.resize(n); }
    /// Number of trainable scalars.
    std::size_t trainable_scalars() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<Param<T>> params_;
};

/// Batch activation, channel-major across the batch:
/// v[(c * N + n) * L + t].
template <class T>
struct Act {
    std::size_t C = 0, N = 0, L = 0;
    std::vector<T> v;

    Act() = default;
    Act(std::size_t c, std::size_t n, std::size_t l) : C(c), N(n), L(l), v(c * n * l, T(0)) {}
    T* row(std::size_t c) { return v.data() + c * N * L; }
    const T* row(std::size_t c) const { return v.data() + c * N * L; }
    T& at(std::size_t c, std::size_t n, std::size_t t) { return v[(c * N + n) * L + t]; }
    T at(std::size_t c, std::size_t n, std::size_t t) const { return v[(c * N + n) * L + t]; }
    std::size_t cols() const noexcept { return N * L; }
};

template <class T>
Act<T> pack_windows(std::span<const SignalWindow> windows);

/// Per-head integer targets; an empty vector leaves the head inactive.
using HeadLabels = std::array<std::vector<int>, kHeadCount>;

struct ConvSpec {
    std::size_t cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
    std::size_t w = 0; // parameter index, shape [cout, cin, k]
    std::size_t out_length(std::size_t L) const { return (L + 2 * pad - k) / stride + 1; }
};

struct BnSpec {
    std::size_t c = 0;
    std::size_t gamma = 0, beta = 0, mean = 0, var = 0;
};

struct LinearSpec {
    std::size_t in = 0, out = 0;
    std::size_t w = 0, b = 0; // w shape [out, in]
};

struct BlockSpec {
    BnSpec bn1;
    ConvSpec conv1;
    BnSpec bn2;
    ConvSpec conv2;
    std::optional<ConvSpec> proj;
    int stage = 0;
};

struct DownstreamSpec {
    LinearSpec hidden;
    LinearSpec out;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

template <class T>
struct ForwardOutput {
    std::size_t N = 0;
    std::vector<T> features; // N x feature_dim
    std::array<std::vector<T>, kHeadCount> logits; // N x classes, empty if not computed
};

template <class T>
struct LossResult {
    double loss = 0.0;
    std::array<double, kHeadCount> head_loss{};
    ForwardOutput<T> out;
};

/// Trunk, pretext heads, and optional downstream head over one parameter set.
template <class T>
class Network {
public:
    /// Trunk + three pretext heads, He-normal convs, BN scale 1 / shift 0.
    static Network build(const NetConfig& cfg, Rng& rng);
    /// Same structure with all parameters zero (used when loading).
    static Network skeleton(const NetConfig& cfg, int downstream_classes);

    const NetConfig& config() const noexcept { return cfg_; }
    ParamSet<T>& params() noexcept { return params_; }
    const ParamSet<T>& params() const noexcept { return params_; }

    /// Attaches feature -> head_hidden (ReLU) -> n_classes, freshly initialized.
    void attach_downstream(int n_classes, Rng& rng);
    void detach_downstream();
    int downstream_classes() const noexcept { return down_ ? static_cast<int>(down_->out.out) : 0; }
    int head_classes(Head h) const;

    bool is_trunk_param(std::size_t i) const noexcept { return i < trunk_params_; }
    std::size_t trunk_param_count() const noexcept { return trunk_params_; }
    /// Trainable scalars in trunk + pretext heads + downstream hidden layer.
    static std::size_t parameter_count(const NetConfig& cfg);

    ForwardOutput<T> forward(const Act<T>& x, Mode mode, std::span<const Head> heads);
    /// Eval-mode trunk features only (N x feature_dim).
    std::vector<T> features(const Act<T>& x);
    /// Logits of `h` from precomputed features.
    std::vector<T> head_logits(Head h, std::span<const T> features, std::size_t N) const;

    /// Mean over active heads of the mean cross-entropy, and gradients for
    /// every trainable parameter reached (trunk excluded when !train_trunk).
    /// The trunk runs in train mode when train_trunk, else in eval mode.
    LossResult<T> loss_and_grad(const Act<T>& x, const HeadLabels& labels, bool train_trunk);
    /// Same loss computed from fixed features; only head parameters receive gradients.
    LossResult<T> head_loss_and_grad(std::span<const T> features, std::size_t N, const HeadLabels& labels);
    /// Loss only, no parameter or running-stat changes (train-mode batch statistics when `mode` is train).
    double loss(const Act<T>& x, const HeadLabels& labels, Mode mode);

    /// When enabled, loss() records a hash of every ReLU on/off state it
    /// passed through, so finite-difference checks can detect kink crossings.
    void set_pattern_tracking(bool on) { track_pattern_ = on; }
    std::uint64_t activation_pattern() const noexcept { return pattern_; }

    /// Called after gradients are computed; lets tests tamper with gradients.
    void set_gradient_hook(std::function<void(ParamSet<T>&)> hook) { hook_ = std::move(hook); }

    template <class U>
    Network<U> cast() const;

    const ConvSpec& stem() const noexcept { return stem_; }
    const std::vector<BlockSpec>& blocks() const noexcept { return blocks_; }
    const BnSpec& final_bn1() const noexcept { return final_bn1_; }
    const ConvSpec& final_conv() const noexcept { return final_conv_; }
    const BnSpec& final_bn2() const noexcept { return final_bn2_; }
    const LinearSpec& pretext_head(Head h) const { return pretext_[static_cast<int>(h)]; }
    const std::optional<DownstreamSpec>& downstream() const noexcept { return down_; }

    Network() = default;

private:
    template <class U>
    friend class Network;

    explicit Network(const NetConfig& cfg);
    LossResult<T> head_pass(std::span<const T> features, std::size_t N, const HeadLabels& labels,
                            std::vector<T>* dfeatures);

    NetConfig cfg_;
    ParamSet<T> params_;
    std::size_t trunk_params_ = 0;
    std::size_t head_params_end_ = 0;
    ConvSpec stem_;
    std::vector<BlockSpec> blocks_;
    BnSpec final_bn1_;
    ConvSpec final_conv_;
    BnSpec final_bn2_;
    std::array<LinearSpec, kPretextHeadCount> pretext_{};
    std::optional<DownstreamSpec> down_;
    std::function<void(ParamSet<T>&)> hook_;
    bool track_pattern_ = false;
    std::uint64_t pattern_ = 0;
};

/// Row-wise softmax of an N x k logit matrix.
template <class T>
std::vector<T> softmax_rows(std::span<const T> logits, std::size_t k);

/// Row-wise argmax (ties to the lower index).
template <class T>
std::vector<int> argmax_rows(std::span<const T> logits, std::size_t k);

extern template class Network<float>;
extern template class Network<double>;

} // namespace har::nn
