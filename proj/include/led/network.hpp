#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "led/raw.hpp"
#include "led/repnr.hpp"

// UNet assembly: five encoder stages of two RepNR blocks each (maxpool
// between stages), a mirrored decoder with stride-2 transposed-conv
// upsampling and skip concatenation, and a plain 1x1 output head. Phase
// transitions and parameter freezing apply to every block at once.

namespace led {

struct NetworkConfig {
    int base_width = 32;
    int stages = 5;
    int in_channels = 4;
    int out_channels = 4;
    double leaky_slope = 0.2;

    void validate() const {
        if (stages < 2) throw DataError("NetworkConfig: stages must be >= 2");
        if (base_width < 1) throw DataError("NetworkConfig: base_width must be >= 1");
        if (in_channels < 1 || out_channels < 1) throw DataError("NetworkConfig: bad channels");
        if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
            throw DataError("NetworkConfig: leaky_slope must be in (0,1)");
    }

    int width(int stage) const { return base_width << stage; } // stage 0-based
};

template <class T>
struct LEDNetwork {
    NetworkConfig cfg;
    int m = 1;
    Phase phase = Phase::pretrain;

    struct EncStage {
        RepNRBlock<T> b1, b2;
    };
    struct DecStage {
        Tensor<T> up_weight; // [Cin,Cout,2,2]
        Tensor<T> up_bias;   // [Cout]
        RepNRBlock<T> b1, b2;
    };

    std::vector<EncStage> enc; // stages entries, shallow to deep
    std::vector<DecStage> dec; // stages-1 entries, deep to shallow
    Tensor<T> head_weight;     // [out,base,1,1]
    Tensor<T> head_bias;       // [out]

    // Input spatial extents (packed domain) must divide by this.
    int spatial_divisor() const { return 1 << (cfg.stages - 1); }

    static LEDNetwork build(const NetworkConfig& cfg, int m, Rng& rng) {
        cfg.validate();
        if (m < 1) throw DataError("build_network: m must be >= 1");
        LEDNetwork net;
        net.cfg = cfg;
        net.m = m;
        for (int s = 0; s < cfg.stages; ++s) {
            const int cin = s == 0 ? cfg.in_channels : cfg.width(s - 1);
            EncStage st;
            st.b1 = RepNRBlock<T>::init(cin, cfg.width(s), m, rng, cfg.leaky_slope);
            st.b2 = RepNRBlock<T>::init(cfg.width(s), cfg.width(s), m, rng, cfg.leaky_slope);
            net.enc.push_back(std::move(st));
        }
        for (int j = 0; j < cfg.stages - 1; ++j) {
            const int deep = cfg.width(cfg.stages - 1 - j);
            const int shallow = cfg.width(cfg.stages - 2 - j);
            DecStage st;
            st.up_weight = up_init(deep, shallow, rng, cfg.leaky_slope);
            st.up_bias = Tensor<T>::zeros({shallow});
            st.b1 = RepNRBlock<T>::init(2 * shallow, shallow, m, rng, cfg.leaky_slope);
            st.b2 = RepNRBlock<T>::init(shallow, shallow, m, rng, cfg.leaky_slope);
            net.dec.push_back(std::move(st));
        }
        net.head_weight = head_init(cfg.out_channels, cfg.base_width, rng);
        net.head_bias = Tensor<T>::zeros({cfg.out_channels});
        net.apply_phase_flags();
        return net;
    }

    static LEDNetwork skeleton(const NetworkConfig& cfg, int m, Phase phase) {
        cfg.validate();
        LEDNetwork net;
        net.cfg = cfg;
        net.m = m;
        net.phase = phase;
        for (int s = 0; s < cfg.stages; ++s) {
            const int cin = s == 0 ? cfg.in_channels : cfg.width(s - 1);
            net.enc.push_back({RepNRBlock<T>::skeleton(cin, cfg.width(s), m, phase),
                               RepNRBlock<T>::skeleton(cfg.width(s), cfg.width(s), m, phase)});
        }
        for (int j = 0; j < cfg.stages - 1; ++j) {
            const int deep = cfg.width(cfg.stages - 1 - j);
            const int shallow = cfg.width(cfg.stages - 2 - j);
            DecStage st;
            st.up_weight = Tensor<T>::zeros({deep, shallow, 2, 2});
            st.up_bias = Tensor<T>::zeros({shallow});
            st.b1 = RepNRBlock<T>::skeleton(2 * shallow, shallow, m, phase);
            st.b2 = RepNRBlock<T>::skeleton(shallow, shallow, m, phase);
            net.dec.push_back(std::move(st));
        }
        net.head_weight = Tensor<T>::zeros({cfg.out_channels, cfg.base_width, 1, 1});
        net.head_bias = Tensor<T>::zeros({cfg.out_channels});
        net.apply_phase_flags();
        return net;
    }

    Tensor<T> forward(const Tensor<T>& x, std::optional<int> branch_index = {}) const {
        if (x.ndim() != 4 || x.dim(1) != cfg.in_channels)
            throw ShapeError("network_forward: input must be [N," +
                             std::to_string(cfg.in_channels) + ",H,W]");
        const int div = spatial_divisor();
        if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
            throw ShapeError("network_forward: spatial extents must divide by " +
                             std::to_string(div));
        if (phase == Phase::pretrain && !branch_index)
            throw PhaseError("network_forward: pretrain requires a branch index");

        const T slope = static_cast<T>(cfg.leaky_slope);
        std::vector<Tensor<T>> skips;
        Tensor<T> h = x;
        for (int s = 0; s < cfg.stages; ++s) {
            h = ops::leaky_relu(enc[static_cast<std::size_t>(s)].b1.forward(h, branch_index), slope);
            h = ops::leaky_relu(enc[static_cast<std::size_t>(s)].b2.forward(h, branch_index), slope);
            if (s < cfg.stages - 1) {
                skips.push_back(h);
                h = ops::maxpool2(h);
            }
        }
        for (int j = 0; j < cfg.stages - 1; ++j) {
            const auto& st = dec[static_cast<std::size_t>(j)];
            h = ops::transposed_conv2(h, st.up_weight, st.up_bias);
            h = ops::concat_channels(h, skips[static_cast<std::size_t>(cfg.stages - 2 - j)]);
            h = ops::leaky_relu(st.b1.forward(h, branch_index), slope);
            h = ops::leaky_relu(st.b2.forward(h, branch_index), slope);
        }
        return ops::conv1x1(h, head_weight, head_bias);
    }

    /// pretrain -> finetune_csa: every block collapses its branches into
    /// CSA^T and every convolution (shared 3x3, upsampling, head) freezes.
    void to_finetune_csa(CsaInit mode) {
        if (phase != Phase::pretrain) throw PhaseError("set_phase: expected pretrain");
        for_each_block([&](RepNRBlock<T>& b) { b.init_target_csa(mode); });
        phase = Phase::finetune_csa;
        apply_phase_flags();
    }

    /// finetune_csa -> finetune_omnr: CSA^T freezes too; zero OMNR branches
    /// become the only trainable parameters.
    void to_finetune_omnr() {
        if (phase != Phase::finetune_csa) throw PhaseError("set_phase: expected finetune_csa");
        for_each_block([](RepNRBlock<T>& b) { b.add_omnr(); });
        phase = Phase::finetune_omnr;
        apply_phase_flags();
    }

    void freeze_all() {
        for (auto& p : all_params()) p.set_requires_grad(false);
    }

    /// Fuse every RepNR block into a plain convolution. The result has plain
    /// UNet parameter count and reproduces this network's forward exactly up
    /// to floating point tolerance.
    LEDNetwork deploy() const {
        if (phase == Phase::pretrain)
            throw PhaseError("deploy: pretrain network needs a branch selection");
        LEDNetwork out;
        out.cfg = cfg;
        out.m = m;
        out.phase = Phase::deployed;
        for (const auto& st : enc) {
            EncStage d;
            d.b1 = fused_block(st.b1);
            d.b2 = fused_block(st.b2);
            out.enc.push_back(std::move(d));
        }
        for (const auto& st : dec) {
            DecStage d;
            d.up_weight = st.up_weight.detach();
            d.up_bias = st.up_bias.detach();
            d.b1 = fused_block(st.b1);
            d.b2 = fused_block(st.b2);
            out.dec.push_back(std::move(d));
        }
        out.head_weight = head_weight.detach();
        out.head_bias = head_bias.detach();
        return out;
    }

    std::vector<Tensor<T>> all_params() {
        std::vector<Tensor<T>> out;
        for (auto& st : enc) {
            st.b1.collect_params(out);
            st.b2.collect_params(out);
        }
        for (auto& st : dec) {
            out.push_back(st.up_weight);
            out.push_back(st.up_bias);
            st.b1.collect_params(out);
            st.b2.collect_params(out);
        }
        out.push_back(head_weight);
        out.push_back(head_bias);
        return out;
    }

    std::vector<Tensor<T>> trainable_params() {
        std::vector<Tensor<T>> out;
        for (auto& p : all_params())
            if (p.requires_grad()) out.push_back(p);
        return out;
    }

    std::int64_t parameter_count() {
        std::int64_t n = 0;
        for (auto& p : all_params()) n += p.numel();
        return n;
    }

    /// Canonical dotted names (enc.s1.b1.conv.weight, enc.s1.b1.csa.3.scale,
    /// dec.s2.b2.omnr.weight, head.weight, ...).
    std::map<std::string, Tensor<T>> named_params() {
        std::map<std::string, Tensor<T>> out;
        for (std::size_t s = 0; s < enc.size(); ++s) {
            const std::string p = "enc.s" + std::to_string(s + 1) + ".";
            add_block_names(out, p + "b1.", enc[s].b1);
            add_block_names(out, p + "b2.", enc[s].b2);
        }
        for (std::size_t j = 0; j < dec.size(); ++j) {
            const std::string p = "dec.s" + std::to_string(j + 1) + ".";
            out.emplace(p + "up.weight", dec[j].up_weight);
            out.emplace(p + "up.bias", dec[j].up_bias);
            add_block_names(out, p + "b1.", dec[j].b1);
            add_block_names(out, p + "b2.", dec[j].b2);
        }
        out.emplace("head.weight", head_weight);
        out.emplace("head.bias", head_bias);
        return out;
    }

    template <class Fn>
    void for_each_block(Fn&& fn) {
        for (auto& st : enc) {
            fn(st.b1);
            fn(st.b2);
        }
        for (auto& st : dec) {
            fn(st.b1);
            fn(st.b2);
        }
    }

    /// requires_grad flags implied by the phase: everything in pretrain,
    /// CSA^T only in finetune_csa, OMNR only in finetune_omnr, nothing when
    /// deployed.
    void apply_phase_flags() {
        for (auto& p : all_params()) p.set_requires_grad(phase == Phase::pretrain);
        if (phase == Phase::finetune_csa) {
            for_each_block([](RepNRBlock<T>& b) {
                b.branches.front().scale.set_requires_grad(true);
                b.branches.front().shift.set_requires_grad(true);
            });
        } else if (phase == Phase::finetune_omnr) {
            for_each_block([](RepNRBlock<T>& b) {
                b.omnr->weight.set_requires_grad(true);
                b.omnr->bias.set_requires_grad(true);
            });
        }
    }

private:
    static RepNRBlock<T> fused_block(const RepNRBlock<T>& b) {
        PlainConv<T> pc = b.fuse();
        RepNRBlock<T> out;
        out.shared_weight = pc.weight;
        out.shared_bias = pc.bias;
        out.phase = Phase::deployed;
        return out;
    }

    static void add_block_names(std::map<std::string, Tensor<T>>& out, const std::string& p,
                                RepNRBlock<T>& b) {
        out.emplace(p + "conv.weight", b.shared_weight);
        out.emplace(p + "conv.bias", b.shared_bias);
        if (b.phase == Phase::pretrain) {
            for (std::size_t k = 0; k < b.branches.size(); ++k) {
                out.emplace(p + "csa." + std::to_string(k + 1) + ".scale", b.branches[k].scale);
                out.emplace(p + "csa." + std::to_string(k + 1) + ".shift", b.branches[k].shift);
            }
        } else if (!b.branches.empty()) {
            out.emplace(p + "csa.t.scale", b.branches.front().scale);
            out.emplace(p + "csa.t.shift", b.branches.front().shift);
        }
        if (b.omnr) {
            out.emplace(p + "omnr.weight", b.omnr->weight);
            out.emplace(p + "omnr.bias", b.omnr->bias);
        }
    }

    static Tensor<T> up_init(int cin, int cout, Rng& rng, double slope) {
        const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
        const double bound = gain * std::sqrt(3.0 / (static_cast<double>(cin) * 4.0));
        Tensor<T> w = Tensor<T>::zeros({cin, cout, 2, 2});
        for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
        return w;
    }

    static Tensor<T> head_init(int cout, int cin, Rng& rng) {
        const double bound = std::sqrt(3.0 / static_cast<double>(cin));
        Tensor<T> w = Tensor<T>::zeros({cout, cin, 1, 1});
        for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
        return w;
    }
};

/// Persist a network: every parameter under its canonical name plus the
/// phase/m/base_width/stages metadata.
template <class T>
void save_checkpoint(LEDNetwork<T>& net, const std::string& path) {
    raw::Container c;
    for (auto& [name, tensor] : net.named_params())
        c.tensors.emplace(name, raw::TensorBlob::from(tensor));
    c.meta["phase"] = phase_name(net.phase);
    c.meta["m"] = std::to_string(net.m);
    c.meta["base_width"] = std::to_string(net.cfg.base_width);
    c.meta["stages"] = std::to_string(net.cfg.stages);
    raw::write_container(path, c);
}

template <class T>
LEDNetwork<T> load_checkpoint(const std::string& path) {
    raw::Container c = raw::read_container(path);
    const auto need = [&](const char* key) {
        auto it = c.meta.find(key);
        if (it == c.meta.end()) throw DataError("checkpoint missing metadata: " + std::string(key));
        return it->second;
    };
    NetworkConfig cfg;
    cfg.base_width = std::stoi(need("base_width"));
    cfg.stages = std::stoi(need("stages"));
    const Phase phase = phase_from_name(need("phase"));
    const int m = std::stoi(need("m"));

    // channel counts are recoverable from stored tensor shapes
    if (auto it = c.tensors.find("head.weight"); it != c.tensors.end())
        cfg.out_channels = it->second.dims.at(0);
    if (auto it = c.tensors.find("enc.s1.b1.conv.weight"); it != c.tensors.end())
        cfg.in_channels = it->second.dims.at(1);

    LEDNetwork<T> net = LEDNetwork<T>::skeleton(cfg, m, phase);
    auto named = net.named_params();
    if (named.size() != c.tensors.size())
        throw DataError("checkpoint tensor set does not match the declared structure");
    for (auto& [name, tensor] : named) {
        auto it = c.tensors.find(name);
        if (it == c.tensors.end()) throw DataError("checkpoint missing tensor: " + name);
        if (it->second.dims != tensor.dims())
            throw DataError("checkpoint tensor shape mismatch: " + name);
        Tensor<T> loaded = it->second.template to<T>();
        std::copy_n(loaded.data().data(), loaded.numel(), tensor.data().data());
    }
    return net;
}

} // namespace led
