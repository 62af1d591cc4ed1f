#pragma once

#include "har/nn/network.hpp"
#include "har/signal.hpp"

#include <string>
#include <vector>

namespace har::explain {

/// Canonized 64-bit eval-mode copy of a network for attribution.
///
/// Each BN that directly follows a conv is folded into that conv's weights
/// and bias; the leading BN of each block stays as a per-channel affine
/// node because its input also feeds the skip path.
struct Node {
    enum class Kind { input, conv, affine, relu, add, gap, dense };

    Kind kind = Kind::input;
    std::string name;
    std::vector<int> inputs;
    /// Rule group for composite LRP: 0 stem and first stage, 1..n-1 the
    /// later stages, n_stages the final conv, -1 pooling and heads.
    int group = -1;

    // conv: w[cout][cin][k]; dense: w[out][in]; affine: w = scale, b = shift.
    std::vector<double> w, b;
    std::size_t cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
    // Output shape (channels x length); dense output is out x 1.
    std::size_t C = 0, L = 0;
};

class EvalGraph {
public:
    template <class T>
    static EvalGraph from(const nn::Network<T>& net);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::vector<Node>& nodes() noexcept { return nodes_; }
    /// Node producing the logits of `head` (a dense node).
    int head_node(nn::Head h) const;
    int n_stages() const noexcept { return n_stages_; }
    std::size_t input_length() const noexcept { return nodes_.front().L; }

    /// Activations of every node; entry i has nodes()[i].C * L values.
    std::vector<std::vector<double>> forward(const SignalWindow& x) const;
    std::vector<std::vector<double>> forward(const std::vector<double>& x) const;

    /// Removes every bias and affine shift (testing aid).
    void zero_biases();

private:
    int add(Node n);
    std::vector<Node> nodes_;
    std::array<int, nn::kHeadCount> heads_{-1, -1, -1, -1};
    int n_stages_ = 0;
};

} // namespace har::explain
