#include "har/nn/checkpoint.hpp"

#include "har/binary_io.hpp"
#include "har/error.hpp"

#include <fmt/format.h>

#include <fstream>

namespace har::nn {

using namespace binio;

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError(fmt::format("cannot write {}", path.string()));
    put_magic(os, "HARC");
    put_uint<std::uint16_t>(os, kFormatVersion);
    const auto& c = net.config();
    for (int v : {c.width_base, c.n_stages, c.blocks_per_stage, c.feature_dim, c.kernel_size, c.input_T,
                  c.head_hidden, net.downstream_classes()})
        put_i32(os, v);
    const auto& params = net.params();
    put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_string16(os, p.name);
        put_uint<std::uint8_t>(os, p.trainable ? 1 : 0);
        put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(p.shape.size()));
        for (auto d : p.shape) put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        for (float v : p.value) put_f32(os, v);
    }
    AdamState<float> st = adam;
    st.resize_for(params);
    put_uint<std::uint64_t>(os, st.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (float v : st.m[i]) put_f32(os, v);
        for (float v : st.v[i]) put_f32(os, v);
    }
    put_uint<std::uint64_t>(os, seed);
    if (!os) throw InputError(fmt::format("write failed for {}", path.string()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError(fmt::format("cannot open {}", path.string()));
    expect_magic(is, "HARC", "checkpoint");
    const auto version = get_uint<std::uint16_t>(is);
    if (version != kFormatVersion) throw InputError(fmt::format("unsupported checkpoint version {}", version));
    NetConfig c;
    c.width_base = get_i32(is);
    c.n_stages = get_i32(is);
    c.blocks_per_stage = get_i32(is);
    c.feature_dim = get_i32(is);
    c.kernel_size = get_i32(is);
    c.input_T = get_i32(is);
    c.head_hidden = get_i32(is);
    const int classes = get_i32(is);
    c.validate();

    Checkpoint ck;
    ck.net = Network<float>::skeleton(c, classes);
    auto& params = ck.net.params();
    const auto n = get_uint<std::uint32_t>(is);
    if (n != params.size())
        throw InputError(fmt::format("checkpoint has {} tensors, architecture expects {}", n, params.size()));
    for (auto& p : params) {
        const auto name = get_string16(is);
        if (name != p.name) throw InputError(fmt::format("checkpoint tensor {} where {} expected", name, p.name));
        p.trainable = get_uint<std::uint8_t>(is) != 0;
        const auto ndim = get_uint<std::uint8_t>(is);
        if (ndim != p.shape.size()) throw InputError(fmt::format("rank mismatch for {}", name));
        for (auto d : p.shape)
            if (get_uint<std::uint32_t>(is) != d) throw InputError(fmt::format("shape mismatch for {}", name));
        for (auto& v : p.value) v = get_f32(is);
    }
    ck.adam.step = get_uint<std::uint64_t>(is);
    ck.adam.resize_for(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (auto& v : ck.adam.m[i]) v = get_f32(is);
        for (auto& v : ck.adam.v[i]) v = get_f32(is);
    }
    ck.seed = get_uint<std::uint64_t>(is);
    return ck;
}

} // namespace har::nn
