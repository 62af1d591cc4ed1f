#include "har/explain/graph.hpp"

#include "har/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace har::explain {

int EvalGraph::add(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int EvalGraph::head_node(nn::Head h) const {
    const int i = heads_[static_cast<int>(h)];
    if (i < 0) throw InvariantError(fmt::format("graph has no {} head", nn::head_name(h)));
    return i;
}

namespace {

template <class T>
struct Folder {
    const nn::ParamSet<T>& P;

    std::vector<double> values(std::size_t i) const { return {P[i].value.begin(), P[i].value.end()}; }

    // Eval-mode BN as y = s * x + t.
    void bn(const nn::BnSpec& s, std::vector<double>& scale, std::vector<double>& shift) const {
        scale.resize(s.c);
        shift.resize(s.c);
        for (std::size_t c = 0; c < s.c; ++c) {
            const double inv = 1.0 / std::sqrt(static_cast<double>(P[s.var].value[c]) + nn::kBnEps);
            scale[c] = static_cast<double>(P[s.gamma].value[c]) * inv;
            shift[c] = static_cast<double>(P[s.beta].value[c]) - scale[c] * static_cast<double>(P[s.mean].value[c]);
        }
    }

    Node conv(const nn::ConvSpec& s, const std::string& name, int input, std::size_t Lin, int group) const {
        Node n;
        n.kind = Node::Kind::conv;
        n.name = name;
        n.inputs = {input};
        n.group = group;
        n.w = values(s.w);
        n.b.assign(s.cout, 0.0);
        n.cin = s.cin;
        n.cout = s.cout;
        n.k = s.k;
        n.stride = s.stride;
        n.pad = s.pad;
        n.C = s.cout;
        n.L = s.out_length(Lin);
        return n;
    }

    // conv followed by BN -> one conv with folded weights and bias.
    Node conv_bn(const nn::ConvSpec& s, const nn::BnSpec& bn_spec, const std::string& name, int input,
                 std::size_t Lin, int group) const {
        Node n = conv(s, name, input, Lin, group);
        std::vector<double> scale, shift;
        bn(bn_spec, scale, shift);
        const std::size_t per = s.cin * s.k;
        for (std::size_t co = 0; co < s.cout; ++co) {
            for (std::size_t j = 0; j < per; ++j) n.w[co * per + j] *= scale[co];
            n.b[co] = shift[co];
        }
        return n;
    }

    Node affine(const nn::BnSpec& s, const std::string& name, int input, std::size_t L, int group) const {
        Node n;
        n.kind = Node::Kind::affine;
        n.name = name;
        n.inputs = {input};
        n.group = group;
        bn(s, n.w, n.b);
        n.C = s.c;
        n.L = L;
        return n;
    }

    Node dense(const nn::LinearSpec& s, const std::string& name, int input) const {
        Node n;
        n.kind = Node::Kind::dense;
        n.name = name;
        n.inputs = {input};
        n.w = values(s.w);
        n.b = values(s.b);
        n.cin = s.in;
        n.cout = s.out;
        n.C = s.out;
        n.L = 1;
        return n;
    }
};

Node simple(Node::Kind kind, const std::string& name, std::vector<int> inputs, std::size_t C, std::size_t L,
            int group) {
    Node n;
    n.kind = kind;
    n.name = name;
    n.inputs = std::move(inputs);
    n.C = C;
    n.L = L;
    n.group = group;
    return n;
}

} // namespace

template <class T>
EvalGraph EvalGraph::from(const nn::Network<T>& net) {
    EvalGraph g;
    const auto& cfg = net.config();
    g.n_stages_ = cfg.n_stages;
    const Folder<T> f{net.params()};
    std::size_t L = static_cast<std::size_t>(cfg.input_T);
    g.add(simple(Node::Kind::input, "input", {}, kChannels, L, 0));
    int cur = g.add(f.conv(net.stem(), "stem.conv", 0, L, 0));
    L = g.nodes_[cur].L;
    for (std::size_t bi = 0; bi < net.blocks().size(); ++bi) {
        const auto& b = net.blocks()[bi];
        const std::string p = fmt::format("s{}.b{}", b.stage, bi % static_cast<std::size_t>(cfg.blocks_per_stage));
        const int grp = b.stage;
        const int a1 = g.add(f.affine(b.bn1, p + ".bn1", cur, L, grp));
        const int r1 = g.add(simple(Node::Kind::relu, p + ".relu1", {a1}, b.bn1.c, L, grp));
        const int c1 = g.add(f.conv_bn(b.conv1, b.bn2, p + ".conv1", r1, L, grp));
        const std::size_t Lout = g.nodes_[c1].L;
        const int r2 = g.add(simple(Node::Kind::relu, p + ".relu2", {c1}, b.conv1.cout, Lout, grp));
        const int c2 = g.add(f.conv(b.conv2, p + ".conv2", r2, Lout, grp));
        int skip = cur;
        if (b.proj) skip = g.add(f.conv(*b.proj, p + ".proj", r1, L, grp));
        cur = g.add(simple(Node::Kind::add, p + ".add", {c2, skip}, b.conv2.cout, Lout, grp));
        L = Lout;
    }
    const int fgrp = cfg.n_stages;
    const int fa = g.add(f.affine(net.final_bn1(), "final.bn1", cur, L, fgrp));
    const int fr = g.add(simple(Node::Kind::relu, "final.relu1", {fa}, net.final_bn1().c, L, fgrp));
    const int fc = g.add(f.conv_bn(net.final_conv(), net.final_bn2(), "final.conv", fr, L, fgrp));
    const int fr2 = g.add(simple(Node::Kind::relu, "final.relu2", {fc}, net.final_conv().cout, L, fgrp));
    const int gap = g.add(simple(Node::Kind::gap, "gap", {fr2}, net.final_conv().cout, 1, -1));
    const char* names[nn::kPretextHeadCount] = {"head.aot", "head.perm", "head.tw"};
    for (int h = 0; h < nn::kPretextHeadCount; ++h)
        g.heads_[h] = g.add(f.dense(net.pretext_head(static_cast<nn::Head>(h)), names[h], gap));
    if (const auto& d = net.downstream()) {
        const int h1 = g.add(f.dense(d->hidden, "down.fc1", gap));
        const int hr = g.add(simple(Node::Kind::relu, "down.relu", {h1}, d->hidden.out, 1, -1));
        g.heads_[static_cast<int>(nn::Head::downstream)] = g.add(f.dense(d->out, "down.fc2", hr));
    }
    return g;
}

std::vector<std::vector<double>> EvalGraph::forward(const SignalWindow& x) const {
    return forward(x.samples());
}

std::vector<std::vector<double>> EvalGraph::forward(const std::vector<double>& x) const {
    const auto& in = nodes_.front();
    if (x.size() != in.C * in.L)
        throw InputError(fmt::format("graph expects {}x{} input, got {} values", in.C, in.L, x.size()));
    std::vector<std::vector<double>> act(nodes_.size());
    act[0] = x;
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        auto& y = act[i];
        y.assign(n.C * n.L, 0.0);
        const auto& a = act[n.inputs[0]];
        switch (n.kind) {
        case Node::Kind::input: break;
        case Node::Kind::conv: {
            const std::size_t Lin = nodes_[n.inputs[0]].L;
            for (std::size_t co = 0; co < n.cout; ++co)
                for (std::size_t to = 0; to < n.L; ++to) {
                    double s = n.b[co];
                    for (std::size_t ci = 0; ci < n.cin; ++ci)
                        for (std::size_t kk = 0; kk < n.k; ++kk) {
                            const auto t = static_cast<std::ptrdiff_t>(to * n.stride + kk) -
                                           static_cast<std::ptrdiff_t>(n.pad);
                            if (t < 0 || t >= static_cast<std::ptrdiff_t>(Lin)) continue;
                            s += n.w[(co * n.cin + ci) * n.k + kk] * a[ci * Lin + static_cast<std::size_t>(t)];
                        }
                    y[co * n.L + to] = s;
                }
            break;
        }
        case Node::Kind::affine:
            for (std::size_t c = 0; c < n.C; ++c)
                for (std::size_t t = 0; t < n.L; ++t) y[c * n.L + t] = n.w[c] * a[c * n.L + t] + n.b[c];
            break;
        case Node::Kind::relu:
            for (std::size_t j = 0; j < y.size(); ++j) y[j] = a[j] > 0.0 ? a[j] : 0.0;
            break;
        case Node::Kind::add: {
            const auto& b = act[n.inputs[1]];
            for (std::size_t j = 0; j < y.size(); ++j) y[j] = a[j] + b[j];
            break;
        }
        case Node::Kind::gap: {
            const std::size_t Lin = nodes_[n.inputs[0]].L;
            for (std::size_t c = 0; c < n.C; ++c) {
                double s = 0.0;
                for (std::size_t t = 0; t < Lin; ++t) s += a[c * Lin + t];
                y[c] = s / static_cast<double>(Lin);
            }
            break;
        }
        case Node::Kind::dense:
            for (std::size_t o = 0; o < n.cout; ++o) {
                double s = n.b[o];
                for (std::size_t j = 0; j < n.cin; ++j) s += n.w[o * n.cin + j] * a[j];
                y[o] = s;
            }
            break;
        }
    }
    return act;
}

void EvalGraph::zero_biases() {
    for (auto& n : nodes_)
        if (n.kind == Node::Kind::conv || n.kind == Node::Kind::dense || n.kind == Node::Kind::affine)
            std::fill(n.b.begin(), n.b.end(), 0.0);
}

template EvalGraph EvalGraph::from<float>(const nn::Network<float>&);
template EvalGraph EvalGraph::from<double>(const nn::Network<double>&);

} // namespace har::explain
