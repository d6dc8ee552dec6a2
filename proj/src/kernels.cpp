#include "led/kernels.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

namespace led::kernels {
namespace {

struct State {
    Isa isa;
    Table<float> f32;
    Table<double> f64;
};

Isa pick_default() {
    if (const char* env = std::getenv("LED_KERNELS")) {
        std::string v(env);
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2" && avx2_supported()) return Isa::avx2;
        // "auto" or anything else falls through
    }
    return avx2_supported() ? Isa::avx2 : Isa::scalar;
}

State make_state(Isa isa) {
    State s;
    s.isa = isa;
#if LED_HAVE_AVX2
    if (isa == Isa::avx2) {
        s.f32 = detail::avx2_table<float>();
        s.f64 = detail::avx2_table<double>();
        return s;
    }
#endif
    s.isa = Isa::scalar;
    s.f32 = detail::scalar_table<float>();
    s.f64 = detail::scalar_table<double>();
    return s;
}

State& state() {
    static State s = make_state(pick_default());
    return s;
}

} // namespace

bool avx2_supported() {
#if LED_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active() { return state().isa; }

void select(Isa isa) { state() = make_state(isa); }

bool select_by_name(std::string_view name) {
    if (name == "auto") {
        select(avx2_supported() ? Isa::avx2 : Isa::scalar);
        return true;
    }
    if (name == "scalar") {
        select(Isa::scalar);
        return true;
    }
    if (name == "avx2") {
        if (!avx2_supported()) return false;
        select(Isa::avx2);
        return true;
    }
    return false;
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

template <>
const Table<float>& table<float>() {
    return state().f32;
}

template <>
const Table<double>& table<double>() {
    return state().f64;
}

} // namespace led::kernels
