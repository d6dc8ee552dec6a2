#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "led/ops.hpp"
#include "led/rng.hpp"

// RepNR block: per-camera channel-wise affine branches (CSA) in front of a
// shared 3x3 convolution, plus an optional zero-initialized parallel 3x3
// branch (OMNR) for noise the synthetic model does not cover. The whole
// block folds into one plain convolution:
//
//   W0(kx + b) + b0 + W1 x + b1 = (W0 k + W1) x + (W0 b + b0 + b1)
//
// The CSA shift fills the convolution padding ring (the affine acts on the
// zero-padded input), which keeps that identity exact on border pixels.

namespace led {

enum class Phase { pretrain, finetune_csa, finetune_omnr, deployed };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::pretrain: return "pretrain";
        case Phase::finetune_csa: return "finetune_csa";
        case Phase::finetune_omnr: return "finetune_omnr";
        case Phase::deployed: return "deployed";
    }
    return "?";
}

inline Phase phase_from_name(const std::string& s) {
    if (s == "pretrain") return Phase::pretrain;
    if (s == "finetune_csa") return Phase::finetune_csa;
    if (s == "finetune_omnr") return Phase::finetune_omnr;
    if (s == "deployed") return Phase::deployed;
    throw DataError("unknown phase: " + s);
}

enum class CsaInit { average, unit };

template <class T>
struct CSABranch {
    Tensor<T> scale; // [Cin], starts at 1
    Tensor<T> shift; // [Cin], starts at 0
};

template <class T>
struct PlainConv {
    Tensor<T> weight; // [Cout,Cin,3,3]
    Tensor<T> bias;   // [Cout]
};

template <class T>
struct RepNRBlock {
    std::vector<CSABranch<T>> branches; // m entries in pretrain, 1 in finetune, 0 deployed
    Tensor<T> shared_weight;            // W0 [Cout,Cin,3,3]
    Tensor<T> shared_bias;              // b0 [Cout]
    std::optional<PlainConv<T>> omnr;   // W1, b1
    Phase phase = Phase::pretrain;

    int in_channels() const { return shared_weight.dim(1); }
    int out_channels() const { return shared_weight.dim(0); }

    /// Fresh pretrain block: fan-in-scaled uniform shared weights, zero
    /// bias, m identity CSA branches.
    static RepNRBlock init(int cin, int cout, int m, Rng& rng, double leaky_slope = 0.2) {
        if (m < 1) throw DataError("RepNRBlock: m must be >= 1");
        RepNRBlock blk;
        blk.shared_weight = he_uniform(cout, cin, rng, leaky_slope);
        blk.shared_bias = Tensor<T>::zeros({cout});
        for (int k = 0; k < m; ++k) {
            blk.branches.push_back(
                {Tensor<T>::full({cin}, T(1)), Tensor<T>::zeros({cin})});
        }
        return blk;
    }

    /// Zero-parameter skeleton used when loading checkpoints.
    static RepNRBlock skeleton(int cin, int cout, int m, Phase phase) {
        RepNRBlock blk;
        blk.shared_weight = Tensor<T>::zeros({cout, cin, 3, 3});
        blk.shared_bias = Tensor<T>::zeros({cout});
        blk.phase = phase;
        const int nb = phase == Phase::pretrain ? m : (phase == Phase::deployed ? 0 : 1);
        for (int k = 0; k < nb; ++k)
            blk.branches.push_back({Tensor<T>::zeros({cin}), Tensor<T>::zeros({cin})});
        if (phase == Phase::finetune_omnr)
            blk.omnr = PlainConv<T>{Tensor<T>::zeros({cout, cin, 3, 3}), Tensor<T>::zeros({cout})};
        return blk;
    }

    Tensor<T> forward(const Tensor<T>& x, std::optional<int> branch_index = {}) const {
        if (phase == Phase::deployed) return ops::conv3x3(x, shared_weight, shared_bias);

        const CSABranch<T>* br = nullptr;
        if (phase == Phase::pretrain) {
            if (!branch_index) throw PhaseError("repnr_forward: pretrain requires a branch index");
            if (*branch_index < 0 || *branch_index >= static_cast<int>(branches.size()))
                throw PhaseError("repnr_forward: branch index out of range");
            br = &branches[static_cast<std::size_t>(*branch_index)];
        } else {
            br = &branches.front();
        }

        // affine on the zero-padded input: the ring carries the shift
        Tensor<T> aligned = ops::channel_affine(x, br->scale, br->shift);
        Tensor<T> y = ops::conv3x3(aligned, shared_weight, shared_bias, br->shift);
        if (omnr) y = ops::add(y, ops::conv3x3(x, omnr->weight, omnr->bias));
        return y;
    }

    /// Collapse the m pretrain branches into one CSA^T.
    void init_target_csa(CsaInit mode) {
        if (phase != Phase::pretrain) throw PhaseError("init_target_csa: block not in pretrain");
        const int cin = in_channels();
        CSABranch<T> target{Tensor<T>::full({cin}, T(1)), Tensor<T>::zeros({cin})};
        if (mode == CsaInit::average) {
            const T inv = T(1) / static_cast<T>(branches.size());
            for (int c = 0; c < cin; ++c) {
                T s = T(0), t = T(0);
                for (const auto& b : branches) {
                    s += b.scale.data()[static_cast<std::size_t>(c)];
                    t += b.shift.data()[static_cast<std::size_t>(c)];
                }
                target.scale.data()[static_cast<std::size_t>(c)] = s * inv;
                target.shift.data()[static_cast<std::size_t>(c)] = t * inv;
            }
        }
        branches.assign(1, std::move(target));
        phase = Phase::finetune_csa;
    }

    /// Attach the all-zero OMNR branch; the forward output is unchanged at
    /// the moment of addition.
    void add_omnr() {
        if (phase != Phase::finetune_csa) throw PhaseError("add_omnr: block not in finetune_csa");
        omnr = PlainConv<T>{Tensor<T>::zeros({out_channels(), in_channels(), 3, 3}),
                            Tensor<T>::zeros({out_channels()})};
        phase = Phase::finetune_omnr;
    }

    PlainConv<T> fuse() const {
        if (phase == Phase::deployed)
            return {shared_weight.detach(), shared_bias.detach()};
        if (branches.size() != 1)
            throw PhaseError("fuse: block has multiple branches; use fuse_branch");
        return fuse_branch(0);
    }

    /// Fold branch k (and OMNR when present) into a plain zero-padded conv.
    PlainConv<T> fuse_branch(int k) const {
        if (k < 0 || k >= static_cast<int>(branches.size()))
            throw PhaseError("fuse_branch: branch index out of range");
        const auto& br = branches[static_cast<std::size_t>(k)];
        const int co = out_channels(), ci = in_channels();
        PlainConv<T> out{Tensor<T>::zeros({co, ci, 3, 3}), Tensor<T>::zeros({co})};
        const T* w0 = shared_weight.data().data();
        const T* sc = br.scale.data().data();
        const T* sh = br.shift.data().data();
        const T* w1 = omnr ? omnr->weight.data().data() : nullptr;
        T* wf = out.weight.data().data();
        for (int o = 0; o < co; ++o) {
            T bacc = shared_bias.data()[static_cast<std::size_t>(o)];
            for (int i = 0; i < ci; ++i) {
                const std::int64_t at = (static_cast<std::int64_t>(o) * ci + i) * 9;
                for (int t = 0; t < 9; ++t) {
                    wf[at + t] = w0[at + t] * sc[i] + (w1 ? w1[at + t] : T(0));
                    bacc += w0[at + t] * sh[i];
                }
            }
            if (omnr) bacc += omnr->bias.data()[static_cast<std::size_t>(o)];
            out.bias.data()[static_cast<std::size_t>(o)] = bacc;
        }
        return out;
    }

    /// Replace the block by its fused form (plain conv, no CSA, no OMNR).
    void deploy() {
        if (phase == Phase::deployed) return;
        if (phase == Phase::pretrain) throw PhaseError("deploy: pretrain block has no single branch");
        PlainConv<T> fused = fuse();
        shared_weight = fused.weight;
        shared_bias = fused.bias;
        branches.clear();
        omnr.reset();
        phase = Phase::deployed;
    }

    void collect_params(std::vector<Tensor<T>>& out) {
        out.push_back(shared_weight);
        out.push_back(shared_bias);
        for (auto& b : branches) {
            out.push_back(b.scale);
            out.push_back(b.shift);
        }
        if (omnr) {
            out.push_back(omnr->weight);
            out.push_back(omnr->bias);
        }
    }

private:
    static Tensor<T> he_uniform(int cout, int cin, Rng& rng, double slope) {
        const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
        const double bound = gain * std::sqrt(3.0 / (static_cast<double>(cin) * 9.0));
        Tensor<T> w = Tensor<T>::zeros({cout, cin, 3, 3});
        for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
        return w;
    }
};

} // namespace led
