#include "har/simd/kernels.hpp"
#include "har/simd/reference.hpp"

namespace har::simd {

const KernelTable& scalar_table() noexcept {
    static const KernelTable t{
        Isa::scalar,
        &ref::gemm_nn<float>,
        &ref::gemm_tn<float>,
        &ref::gemm_nt<float>,
        &ref::affine<float>,
        &ref::relu_backward<float>,
        &ref::add<float>,
        &ref::moments<float>,
        &ref::bn_reduce<float>,
        &ref::bn_apply<float>,
    };
    return t;
}

} // namespace har::simd
