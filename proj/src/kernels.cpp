#include "fedpvr/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "fedpvr/common.hpp"

namespace fedpvr::kernels {

const Ops& scalar_table();
#if defined(FEDPVR_HAVE_AVX2)
const Ops& avx2_table();
#endif
#if defined(FEDPVR_HAVE_NEON)
const Ops& neon_table();
#endif

namespace {

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(FEDPVR_HAVE_AVX2)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(FEDPVR_HAVE_NEON)
            return true;  // baseline on aarch64
#else
            return false;
#endif
    }
    return false;
}

Backend pick_default() {
    if (const char* env = std::getenv("FEDPVR_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::Avx2))
            return Backend::Avx2;
        if (std::strcmp(env, "neon") == 0 && backend_available(Backend::Neon))
            return Backend::Neon;
        if (std::strcmp(env, "auto") != 0)
            throw Error(std::string("FEDPVR_KERNELS requests unavailable backend: ") + env);
    }
    if (backend_available(Backend::Avx2)) return Backend::Avx2;
    if (backend_available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

Backend& current() {
    static Backend b = pick_default();
    return b;
}

}  // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon})
        if (backend_available(b)) out.push_back(b);
    return out;
}

const Ops& table(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return scalar_table();
        case Backend::Avx2:
#if defined(FEDPVR_HAVE_AVX2)
            if (backend_available(Backend::Avx2)) return avx2_table();
#endif
            break;
        case Backend::Neon:
#if defined(FEDPVR_HAVE_NEON)
            return neon_table();
#endif
            break;
    }
    throw Error(std::string("kernel backend not available: ") + backend_name(b));
}

const Ops& active() { return table(current()); }

Backend active_backend() { return current(); }

bool set_backend(Backend b) {
    if (!backend_available(b)) return false;
    current() = b;
    return true;
}

}  // namespace fedpvr::kernels
