#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "led/kernels.hpp"
#include "led/parallel.hpp"
#include "led/tensor.hpp"

// Differentiable operator set: exactly what the denoising UNet needs.
// Every op computes its output eagerly and records a closure that scatters
// the output gradient into its parents.

namespace led::ops {

namespace detail {

template <class T>
bool tracked(const Tensor<T>& t) {
    return t.defined() && t.tracked();
}

template <class T, class F>
Tensor<T> make_result(std::vector<int> dims, std::vector<T> data,
                      std::vector<std::shared_ptr<TensorNode<T>>> parents, F&& backprop) {
    Tensor<T> out = Tensor<T>::from_data(std::move(dims), std::move(data));
    bool track = false;
    for (const auto& p : parents) track = track || p->tracked;
    if (track) {
        out.node()->tracked = true;
        out.node()->parents = std::move(parents);
        out.node()->backprop = std::forward<F>(backprop);
    }
    return out;
}

// Copy [N,C,H,W] into a ring-padded buffer [N,C,H+2,W+2]; the ring carries
// pad_values[c] (zero when absent).
template <class T>
std::shared_ptr<std::vector<T>> pad_ring(const Tensor<T>& x, const T* pad_values) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t wp = w + 2, hp = h + 2;
    auto buf = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n) * c * hp * wp);
    const T* src = x.data().data();
    T* dst = buf->data();
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const T fill = pad_values ? pad_values[ci] : T(0);
            T* plane = dst + (static_cast<std::int64_t>(ni) * c + ci) * hp * wp;
            const T* xplane = src + (static_cast<std::int64_t>(ni) * c + ci) * h * w;
            std::fill(plane, plane + wp, fill);
            for (int r = 0; r < h; ++r) {
                T* row = plane + (r + 1) * wp;
                row[0] = fill;
                std::copy_n(xplane + static_cast<std::int64_t>(r) * w, w, row + 1);
                row[w + 1] = fill;
            }
            std::fill(plane + (hp - 1) * wp, plane + hp * wp, fill);
        }
    }
    return buf;
}

inline void require(bool cond, const char* msg) {
    if (!cond) throw ShapeError(msg);
}

} // namespace detail

/// Same-size 3x3 convolution over NCHW input. The one-pixel padding ring is
/// filled with pad_values[c] (zero by default), and pad_values receives
/// gradients from the ring positions when it is a tracked tensor.
template <class T>
Tensor<T> conv3x3_impl(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                       const std::optional<Tensor<T>>& pad_values) {
    detail::require(x.ndim() == 4, "conv3x3: input must be [N,C,H,W]");
    detail::require(w.ndim() == 4 && w.dim(2) == 3 && w.dim(3) == 3,
                    "conv3x3: weight must be [Cout,Cin,3,3]");
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0);
    detail::require(w.dim(1) == cin, "conv3x3: input channels do not match weight");
    detail::require(b.ndim() == 1 && b.dim(0) == cout, "conv3x3: bias must be [Cout]");
    if (pad_values)
        detail::require(pad_values->ndim() == 1 && pad_values->dim(0) == cin,
                        "conv3x3: pad_values must be [Cin]");
    detail::require(h >= 1 && wd >= 1, "conv3x3: empty spatial extent");

    const auto& K = kernels::table<T>();
    auto xpad = detail::pad_ring(x, pad_values ? pad_values->data().data() : nullptr);
    const std::int64_t plane_p = static_cast<std::int64_t>(h + 2) * (wd + 2);
    const std::int64_t plane_o = static_cast<std::int64_t>(h) * wd;

    std::vector<T> y(static_cast<std::size_t>(n) * cout * plane_o);
    {
        const T* wp_ = w.data().data();
        const T* bp = b.data().data();
        T* yp = y.data();
        const T* xp = xpad->data();
        parallel::for_n(static_cast<std::int64_t>(n) * cout, [&](std::int64_t i) {
            const std::int64_t ni = i / cout, o = i % cout;
            K.conv3x3_plane(xp + ni * cin * plane_p, cin, h, wd, wp_ + o * cin * 9, bp[o],
                            yp + i * plane_o);
        });
    }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = b.node();
    auto pn = pad_values ? pad_values->node() : nullptr;
    std::vector<std::shared_ptr<TensorNode<T>>> parents{xn, wn, bn};
    if (pn) parents.push_back(pn);

    auto backprop = [xn, wn, bn, pn, xpad, n, cin, cout, h, wd, plane_p,
                     plane_o](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        const T* g = node.grad.data();
        const std::int64_t wp = wd + 2;

        if (xn->tracked || (pn && pn->tracked)) {
            std::vector<T> dxpad(static_cast<std::size_t>(n) * cin * plane_p, T(0));
            T* dxp = dxpad.data();
            const T* wdat = wn->data.data();
            parallel::for_n(static_cast<std::int64_t>(n) * cin, [&](std::int64_t i) {
                const std::int64_t ni = i / cin, ci = i % cin;
                K.conv3x3_gxpad_plane(g + ni * cout * plane_o, cout, h, wd, wdat, cin,
                                      static_cast<int>(ci), dxp + i * plane_p);
            });
            if (xn->tracked) {
                xn->ensure_grad();
                T* gx = xn->grad.data();
                parallel::for_n(static_cast<std::int64_t>(n) * cin, [&](std::int64_t i) {
                    const T* dplane = dxp + i * plane_p;
                    T* gplane = gx + i * plane_o;
                    for (int r = 0; r < h; ++r) {
                        K.axpy(T(1), dplane + (r + 1) * wp + 1, gplane + static_cast<std::int64_t>(r) * wd, wd);
                    }
                });
            }
            if (pn && pn->tracked) {
                pn->ensure_grad();
                for (int ci = 0; ci < cin; ++ci) {
                    T acc = T(0);
                    for (int ni = 0; ni < n; ++ni) {
                        const T* dplane = dxp + (static_cast<std::int64_t>(ni) * cin + ci) * plane_p;
                        acc += K.sum(dplane, wp); // top row
                        acc += K.sum(dplane + (h + 1) * wp, wp); // bottom row
                        for (int r = 1; r <= h; ++r) {
                            acc += dplane[r * wp] + dplane[r * wp + wd + 1];
                        }
                    }
                    pn->grad[static_cast<std::size_t>(ci)] += acc;
                }
            }
        }

        if (wn->tracked) {
            wn->ensure_grad();
            T* gw = wn->grad.data();
            const T* xp = xpad->data();
            parallel::for_n(cout, [&](std::int64_t o) {
                for (int ni = 0; ni < n; ++ni) {
                    const T* gplane = g + (static_cast<std::int64_t>(ni) * cout + o) * plane_o;
                    for (int ci = 0; ci < cin; ++ci) {
                        K.conv3x3_gw_plane(gplane,
                                           xp + (static_cast<std::int64_t>(ni) * cin + ci) * plane_p,
                                           h, wd, gw + (o * cin + ci) * 9);
                    }
                }
            });
        }

        if (bn->tracked) {
            bn->ensure_grad();
            T* gb = bn->grad.data();
            parallel::for_n(cout, [&](std::int64_t o) {
                T acc = T(0);
                for (int ni = 0; ni < n; ++ni) {
                    acc += K.sum(g + (static_cast<std::int64_t>(ni) * cout + o) * plane_o, plane_o);
                }
                gb[o] += acc;
            });
        }
    };

    return detail::make_result({n, cout, h, wd}, std::move(y), std::move(parents),
                               std::move(backprop));
}

template <class T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return conv3x3_impl<T>(x, w, b, std::nullopt);
}

template <class T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                  const Tensor<T>& pad_values) {
    return conv3x3_impl<T>(x, w, b, std::optional<Tensor<T>>(pad_values));
}

/// Pointwise 1x1 convolution (the network head).
template <class T>
Tensor<T> conv1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require(x.ndim() == 4, "conv1x1: input must be [N,C,H,W]");
    detail::require(w.ndim() == 4 && w.dim(2) == 1 && w.dim(3) == 1,
                    "conv1x1: weight must be [Cout,Cin,1,1]");
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0);
    detail::require(w.dim(1) == cin, "conv1x1: input channels do not match weight");
    detail::require(b.ndim() == 1 && b.dim(0) == cout, "conv1x1: bias must be [Cout]");

    const auto& K = kernels::table<T>();
    const std::int64_t plane = static_cast<std::int64_t>(h) * wd;
    std::vector<T> y(static_cast<std::size_t>(n) * cout * plane);
    {
        const T* xp = x.data().data();
        const T* wp = w.data().data();
        const T* bp = b.data().data();
        T* yp = y.data();
        parallel::for_n(static_cast<std::int64_t>(n) * cout, [&](std::int64_t i) {
            const std::int64_t ni = i / cout, o = i % cout;
            T* yplane = yp + i * plane;
            std::fill(yplane, yplane + plane, bp[o]);
            for (int ci = 0; ci < cin; ++ci) {
                K.axpy(wp[o * cin + ci], xp + (ni * cin + ci) * plane, yplane, plane);
            }
        });
    }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = b.node();
    auto backprop = [xn, wn, bn, n, cin, cout, plane](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        const T* g = node.grad.data();
        if (xn->tracked) {
            xn->ensure_grad();
            T* gx = xn->grad.data();
            const T* wp = wn->data.data();
            parallel::for_n(static_cast<std::int64_t>(n) * cin, [&](std::int64_t i) {
                const std::int64_t ni = i / cin, ci = i % cin;
                for (int o = 0; o < cout; ++o) {
                    K.axpy(wp[static_cast<std::int64_t>(o) * cin + ci],
                           g + (ni * cout + o) * plane, gx + i * plane, plane);
                }
            });
        }
        if (wn->tracked) {
            wn->ensure_grad();
            T* gw = wn->grad.data();
            const T* xp = xn->data.data();
            parallel::for_n(cout, [&](std::int64_t o) {
                for (int ci = 0; ci < cin; ++ci) {
                    T acc = T(0);
                    for (int ni = 0; ni < n; ++ni) {
                        acc += K.dot(g + (static_cast<std::int64_t>(ni) * cout + o) * plane,
                                     xp + (static_cast<std::int64_t>(ni) * cin + ci) * plane, plane);
                    }
                    gw[o * cin + ci] += acc;
                }
            });
        }
        if (bn->tracked) {
            bn->ensure_grad();
            T* gb = bn->grad.data();
            parallel::for_n(cout, [&](std::int64_t o) {
                T acc = T(0);
                for (int ni = 0; ni < n; ++ni)
                    acc += K.sum(g + (static_cast<std::int64_t>(ni) * cout + o) * plane, plane);
                gb[o] += acc;
            });
        }
    };

    return detail::make_result({n, cout, h, wd}, std::move(y), {xn, wn, bn}, std::move(backprop));
}

/// Per-channel affine projection: out[n,c,:,:] = scale[c]*x[n,c,:,:] + shift[c].
template <class T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift) {
    detail::require(x.ndim() == 4, "channel_affine: input must be [N,C,H,W]");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    detail::require(scale.ndim() == 1 && scale.dim(0) == c, "channel_affine: scale length mismatch");
    detail::require(shift.ndim() == 1 && shift.dim(0) == c, "channel_affine: shift length mismatch");

    const auto& K = kernels::table<T>();
    const std::int64_t plane = static_cast<std::int64_t>(h) * wd;
    std::vector<T> y(x.data().size());
    {
        const T* xp = x.data().data();
        const T* sp = scale.data().data();
        const T* tp = shift.data().data();
        T* yp = y.data();
        parallel::for_n(static_cast<std::int64_t>(n) * c, [&](std::int64_t i) {
            K.affine(xp + i * plane, sp[i % c], tp[i % c], yp + i * plane, plane);
        });
    }

    auto xn = x.node();
    auto sn = scale.node();
    auto tn = shift.node();
    auto backprop = [xn, sn, tn, n, c, plane](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        const T* g = node.grad.data();
        if (xn->tracked) {
            xn->ensure_grad();
            T* gx = xn->grad.data();
            const T* sp = sn->data.data();
            parallel::for_n(static_cast<std::int64_t>(n) * c, [&](std::int64_t i) {
                K.axpy(sp[i % c], g + i * plane, gx + i * plane, plane);
            });
        }
        if (sn->tracked) {
            sn->ensure_grad();
            T* gs = sn->grad.data();
            const T* xp = xn->data.data();
            parallel::for_n(c, [&](std::int64_t ci) {
                T acc = T(0);
                for (int ni = 0; ni < n; ++ni) {
                    const std::int64_t at = (static_cast<std::int64_t>(ni) * c + ci) * plane;
                    acc += K.dot(g + at, xp + at, plane);
                }
                gs[ci] += acc;
            });
        }
        if (tn->tracked) {
            tn->ensure_grad();
            T* gt = tn->grad.data();
            parallel::for_n(c, [&](std::int64_t ci) {
                T acc = T(0);
                for (int ni = 0; ni < n; ++ni)
                    acc += K.sum(g + (static_cast<std::int64_t>(ni) * c + ci) * plane, plane);
                gt[ci] += acc;
            });
        }
    };

    return detail::make_result(x.dims(), std::move(y), {xn, sn, tn}, std::move(backprop));
}

/// Leaky ReLU; the subgradient at exactly zero is the slope.
template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    if (!(slope > T(0) && slope < T(1))) throw ShapeError("leaky_relu: slope must be in (0,1)");
    const auto& K = kernels::table<T>();
    std::vector<T> y(x.data().size());
    K.leaky_fwd(x.data().data(), slope, y.data(), x.numel());

    auto xn = x.node();
    auto backprop = [xn, slope](TensorNode<T>& node) {
        if (!xn->tracked) return;
        xn->ensure_grad();
        kernels::table<T>().leaky_bwd(xn->data.data(), node.grad.data(), slope, xn->grad.data(),
                                      node.numel());
    };
    return detail::make_result(x.dims(), std::move(y), {xn}, std::move(backprop));
}

/// 2x2 non-overlapping max pool; gradient routes to the argmax, first
/// occurrence in row-major order on ties.
template <class T>
Tensor<T> maxpool2(const Tensor<T>& x) {
    detail::require(x.ndim() == 4, "maxpool2: input must be [N,C,H,W]");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    if (h % 2 != 0 || wd % 2 != 0) throw ShapeError("maxpool2: odd spatial extent");
    const int ho = h / 2, wo = wd / 2;
    const std::int64_t plane_i = static_cast<std::int64_t>(h) * wd;
    const std::int64_t plane_o = static_cast<std::int64_t>(ho) * wo;

    std::vector<T> y(static_cast<std::size_t>(n) * c * plane_o);
    auto arg = std::make_shared<std::vector<std::int64_t>>(y.size());
    {
        const T* xp = x.data().data();
        T* yp = y.data();
        std::int64_t* ap = arg->data();
        parallel::for_n(static_cast<std::int64_t>(n) * c, [&](std::int64_t i) {
            const T* xplane = xp + i * plane_i;
            for (int r = 0; r < ho; ++r) {
                for (int q = 0; q < wo; ++q) {
                    std::int64_t best = static_cast<std::int64_t>(2 * r) * wd + 2 * q;
                    T bv = xplane[best];
                    const std::int64_t cand[3] = {best + 1, best + wd, best + wd + 1};
                    for (std::int64_t k : cand) {
                        if (xplane[k] > bv) { // strict: ties keep the earliest
                            bv = xplane[k];
                            best = k;
                        }
                    }
                    yp[i * plane_o + r * wo + q] = bv;
                    ap[i * plane_o + r * wo + q] = i * plane_i + best;
                }
            }
        });
    }

    auto xn = x.node();
    auto backprop = [xn, arg](TensorNode<T>& node) {
        if (!xn->tracked) return;
        xn->ensure_grad();
        T* gx = xn->grad.data();
        const T* g = node.grad.data();
        const std::int64_t* ap = arg->data();
        for (std::int64_t i = 0; i < node.numel(); ++i) gx[ap[i]] += g[i];
    };
    return detail::make_result({n, c, ho, wo}, std::move(y), {xn}, std::move(backprop));
}

/// Stride-2 kernel-2 transposed convolution: each input pixel scatters a 2x2
/// patch, doubling the spatial size. weight is [Cin,Cout,2,2].
template <class T>
Tensor<T> transposed_conv2(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require(x.ndim() == 4, "transposed_conv2: input must be [N,C,H,W]");
    detail::require(w.ndim() == 4 && w.dim(2) == 2 && w.dim(3) == 2,
                    "transposed_conv2: weight must be [Cin,Cout,2,2]");
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(1);
    detail::require(w.dim(0) == cin, "transposed_conv2: input channels do not match weight");
    detail::require(b.ndim() == 1 && b.dim(0) == cout, "transposed_conv2: bias must be [Cout]");

    const int ho = 2 * h, wo = 2 * wd;
    const std::int64_t plane_i = static_cast<std::int64_t>(h) * wd;
    const std::int64_t plane_o = static_cast<std::int64_t>(ho) * wo;
    std::vector<T> y(static_cast<std::size_t>(n) * cout * plane_o);
    {
        const T* xp = x.data().data();
        const T* wp = w.data().data();
        const T* bp = b.data().data();
        T* yp = y.data();
        parallel::for_n(static_cast<std::int64_t>(n) * cout, [&](std::int64_t i) {
            const std::int64_t ni = i / cout, o = i % cout;
            T* yplane = yp + i * plane_o;
            std::fill(yplane, yplane + plane_o, bp[o]);
            for (int ci = 0; ci < cin; ++ci) {
                const T* xplane = xp + (ni * cin + ci) * plane_i;
                const T* k = wp + (static_cast<std::int64_t>(ci) * cout + o) * 4;
                for (int r = 0; r < h; ++r) {
                    T* y0 = yplane + static_cast<std::int64_t>(2 * r) * wo;
                    T* y1 = y0 + wo;
                    const T* xrow = xplane + static_cast<std::int64_t>(r) * wd;
                    for (int q = 0; q < wd; ++q) {
                        const T v = xrow[q];
                        y0[2 * q] += k[0] * v;
                        y0[2 * q + 1] += k[1] * v;
                        y1[2 * q] += k[2] * v;
                        y1[2 * q + 1] += k[3] * v;
                    }
                }
            }
        });
    }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = b.node();
    auto backprop = [xn, wn, bn, n, cin, cout, h, wd, plane_i, plane_o](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        const T* g = node.grad.data();
        const int wo = 2 * wd;
        if (xn->tracked) {
            xn->ensure_grad();
            T* gx = xn->grad.data();
            const T* wp = wn->data.data();
            parallel::for_n(static_cast<std::int64_t>(n) * cin, [&](std::int64_t i) {
                const std::int64_t ni = i / cin, ci = i % cin;
                T* gplane = gx + i * plane_i;
                for (int o = 0; o < cout; ++o) {
                    const T* gout = g + (ni * cout + o) * plane_o;
                    const T* k = wp + (ci * cout + o) * 4;
                    for (int r = 0; r < h; ++r) {
                        const T* g0 = gout + static_cast<std::int64_t>(2 * r) * wo;
                        const T* g1 = g0 + wo;
                        T* grow = gplane + static_cast<std::int64_t>(r) * wd;
                        for (int q = 0; q < wd; ++q) {
                            grow[q] += k[0] * g0[2 * q] + k[1] * g0[2 * q + 1] + k[2] * g1[2 * q] +
                                       k[3] * g1[2 * q + 1];
                        }
                    }
                }
            });
        }
        if (wn->tracked) {
            wn->ensure_grad();
            T* gw = wn->grad.data();
            const T* xp = xn->data.data();
            parallel::for_n(cin, [&](std::int64_t ci) {
                for (int o = 0; o < cout; ++o) {
                    T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
                    for (int ni = 0; ni < n; ++ni) {
                        const T* xplane = xp + (static_cast<std::int64_t>(ni) * cin + ci) * plane_i;
                        const T* gout = g + (static_cast<std::int64_t>(ni) * cout + o) * plane_o;
                        for (int r = 0; r < h; ++r) {
                            const T* xrow = xplane + static_cast<std::int64_t>(r) * wd;
                            const T* g0 = gout + static_cast<std::int64_t>(2 * r) * wo;
                            const T* g1 = g0 + wo;
                            for (int q = 0; q < wd; ++q) {
                                const T v = xrow[q];
                                a0 += v * g0[2 * q];
                                a1 += v * g0[2 * q + 1];
                                a2 += v * g1[2 * q];
                                a3 += v * g1[2 * q + 1];
                            }
                        }
                    }
                    T* k = gw + (ci * cout + o) * 4;
                    k[0] += a0;
                    k[1] += a1;
                    k[2] += a2;
                    k[3] += a3;
                }
            });
        }
        if (bn->tracked) {
            bn->ensure_grad();
            T* gb = bn->grad.data();
            parallel::for_n(cout, [&](std::int64_t o) {
                T acc = T(0);
                for (int ni = 0; ni < n; ++ni)
                    acc += K.sum(g + (static_cast<std::int64_t>(ni) * cout + o) * plane_o, plane_o);
                gb[o] += acc;
            });
        }
    };

    return detail::make_result({n, cout, ho, wo}, std::move(y), {xn, wn, bn}, std::move(backprop));
}

/// Channel concatenation [a;b]; gradient splits back.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.ndim() == 4 && b.ndim() == 4, "concat_channels: inputs must be [N,C,H,W]");
    detail::require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                    "concat_channels: spatial/batch mismatch");
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), wd = a.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * wd;
    std::vector<T> y(static_cast<std::size_t>(n) * (ca + cb) * plane);
    for (int ni = 0; ni < n; ++ni) {
        std::copy_n(a.data().data() + static_cast<std::int64_t>(ni) * ca * plane, ca * plane,
                    y.data() + static_cast<std::int64_t>(ni) * (ca + cb) * plane);
        std::copy_n(b.data().data() + static_cast<std::int64_t>(ni) * cb * plane, cb * plane,
                    y.data() + static_cast<std::int64_t>(ni) * (ca + cb) * plane + ca * plane);
    }

    auto an = a.node();
    auto bn = b.node();
    auto backprop = [an, bn, n, ca, cb, plane](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        const T* g = node.grad.data();
        if (an->tracked) {
            an->ensure_grad();
            for (int ni = 0; ni < n; ++ni) {
                K.axpy(T(1), g + static_cast<std::int64_t>(ni) * (ca + cb) * plane,
                       an->grad.data() + static_cast<std::int64_t>(ni) * ca * plane, ca * plane);
            }
        }
        if (bn->tracked) {
            bn->ensure_grad();
            for (int ni = 0; ni < n; ++ni) {
                K.axpy(T(1), g + static_cast<std::int64_t>(ni) * (ca + cb) * plane + ca * plane,
                       bn->grad.data() + static_cast<std::int64_t>(ni) * cb * plane, cb * plane);
            }
        }
    };
    return detail::make_result({n, ca + cb, h, wd}, std::move(y), {an, bn}, std::move(backprop));
}

/// Channel slice [c0, c1) of an NCHW tensor.
template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
    detail::require(x.ndim() == 4, "slice_channels: input must be [N,C,H,W]");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    detail::require(0 <= c0 && c0 < c1 && c1 <= c, "slice_channels: bad channel range");
    const int cs = c1 - c0;
    const std::int64_t plane = static_cast<std::int64_t>(h) * wd;
    std::vector<T> y(static_cast<std::size_t>(n) * cs * plane);
    for (int ni = 0; ni < n; ++ni) {
        std::copy_n(x.data().data() + (static_cast<std::int64_t>(ni) * c + c0) * plane, cs * plane,
                    y.data() + static_cast<std::int64_t>(ni) * cs * plane);
    }
    auto xn = x.node();
    auto backprop = [xn, n, c, c0, cs, plane](TensorNode<T>& node) {
        if (!xn->tracked) return;
        xn->ensure_grad();
        const auto& K = kernels::table<T>();
        for (int ni = 0; ni < n; ++ni) {
            K.axpy(T(1), node.grad.data() + static_cast<std::int64_t>(ni) * cs * plane,
                   xn->grad.data() + (static_cast<std::int64_t>(ni) * c + c0) * plane, cs * plane);
        }
    };
    return detail::make_result({n, cs, h, wd}, std::move(y), {xn}, std::move(backprop));
}

/// Elementwise sum of two equally shaped tensors.
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.dims() == b.dims(), "add: shape mismatch");
    const auto& K = kernels::table<T>();
    std::vector<T> y(a.data().size());
    K.add2(a.data().data(), b.data().data(), y.data(), a.numel());
    auto an = a.node();
    auto bn = b.node();
    auto backprop = [an, bn](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        if (an->tracked) {
            an->ensure_grad();
            K.axpy(T(1), node.grad.data(), an->grad.data(), node.numel());
        }
        if (bn->tracked) {
            bn->ensure_grad();
            K.axpy(T(1), node.grad.data(), bn->grad.data(), node.numel());
        }
    };
    return detail::make_result(a.dims(), std::move(y), {an, bn}, std::move(backprop));
}

/// Mean absolute error. Gradient is sign(pred - target)/count, zero at exact
/// equality.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::require(pred.dims() == target.dims(), "l1_loss: shape mismatch");
    const auto& K = kernels::table<T>();
    const std::int64_t n = pred.numel();
    const T loss = K.sum_abs_diff(pred.data().data(), target.data().data(), n) / static_cast<T>(n);

    auto pn = pred.node();
    auto tn = target.node();
    auto backprop = [pn, tn, n](TensorNode<T>& node) {
        const auto& K = kernels::table<T>();
        const T s = node.grad[0] / static_cast<T>(n);
        if (pn->tracked) {
            pn->ensure_grad();
            K.sign_diff_accum(pn->data.data(), tn->data.data(), s, pn->grad.data(), n);
        }
        if (tn->tracked) {
            tn->ensure_grad();
            K.sign_diff_accum(tn->data.data(), pn->data.data(), s, tn->grad.data(), n);
        }
    };
    return detail::make_result({1}, std::vector<T>{loss}, {pn, tn}, std::move(backprop));
}

/// Mean over all elements.
template <class T>
Tensor<T> mean(const Tensor<T>& x) {
    const auto& K = kernels::table<T>();
    const std::int64_t n = x.numel();
    const T m = K.sum(x.data().data(), n) / static_cast<T>(n);
    auto xn = x.node();
    auto backprop = [xn, n](TensorNode<T>& node) {
        if (!xn->tracked) return;
        xn->ensure_grad();
        const T s = node.grad[0] / static_cast<T>(n);
        for (std::int64_t i = 0; i < n; ++i) xn->grad[static_cast<std::size_t>(i)] += s;
    };
    return detail::make_result({1}, std::vector<T>{m}, {xn}, std::move(backprop));
}

/// clamp(x*ratio, 0, 1) as plain data (inference-side preprocessing, no graph).
template <class T>
Tensor<T> scale_clamp01(const Tensor<T>& x, T ratio) {
    std::vector<T> y(x.data().size());
    const T* xp = x.data().data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = std::clamp(xp[i] * ratio, T(0), T(1));
    }
    return Tensor<T>::from_data(x.dims(), std::move(y));
}

} // namespace led::ops
