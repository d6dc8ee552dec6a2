#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "led/error.hpp"

namespace led {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <class T> struct dtype_of;
template <> struct dtype_of<float> { static constexpr DType value = DType::f32; };
template <> struct dtype_of<double> { static constexpr DType value = DType::f64; };

inline std::int64_t shape_numel(const std::vector<int>& dims) {
    std::int64_t n = 1;
    for (int d : dims) n *= d;
    return n;
}

template <class T>
struct TensorNode {
    std::vector<int> dims;
    std::vector<T> data;
    bool requires_grad = false; // leaf wants a gradient
    bool tracked = false;       // lies on a path to some leaf with requires_grad
    std::vector<T> grad;        // allocated on demand, same extent as data
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backprop; // scatter this->grad into parents

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

/// Dense row-major tensor handle. Copies share the underlying buffer; treat
/// tensors as immutable values once they feed an operator, except parameter
/// buffers owned by a single training loop.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(std::vector<int> dims) {
        return Tensor(std::move(dims), {});
    }

    static Tensor full(std::vector<int> dims, T v) {
        Tensor t(std::move(dims), {});
        for (auto& x : t.node_->data) x = v;
        return t;
    }

    static Tensor scalar(T v) { return full({1}, v); }

    static Tensor from_data(std::vector<int> dims, std::vector<T> data) {
        if (shape_numel(dims) != static_cast<std::int64_t>(data.size()))
            throw ShapeError("Tensor: data length does not match dims");
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>();
        t.node_->dims = std::move(dims);
        t.node_->data = std::move(data);
        return t;
    }

    bool defined() const { return node_ != nullptr; }

    const std::vector<int>& dims() const { return node_->dims; }
    int dim(int i) const { return node_->dims.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(node_->dims.size()); }
    std::int64_t numel() const { return node_->numel(); }

    std::span<T> data() { return {node_->data.data(), node_->data.size()}; }
    std::span<const T> data() const { return {node_->data.data(), node_->data.size()}; }

    T item() const {
        if (numel() != 1) throw ShapeError("item(): tensor is not a scalar");
        return node_->data[0];
    }

    template <class... Ix>
    T& at(Ix... ix) { return node_->data[flat_index(ix...)]; }
    template <class... Ix>
    const T& at(Ix... ix) const { return node_->data[flat_index(ix...)]; }

    Tensor& set_requires_grad(bool b) {
        node_->requires_grad = b;
        node_->tracked = b || node_->tracked;
        if (!b && node_->parents.empty()) node_->tracked = false;
        return *this;
    }
    bool requires_grad() const { return node_->requires_grad; }
    bool tracked() const { return node_ && node_->tracked; }

    std::span<T> grad() {
        node_->ensure_grad();
        return {node_->grad.data(), node_->grad.size()};
    }

    void zero_grad() {
        node_->ensure_grad();
        std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    /// Copy of the data with no graph attached.
    Tensor detach() const {
        return from_data(node_->dims, node_->data);
    }

    /// Same values and requires_grad flag, fresh buffer, no graph.
    Tensor clone() const {
        Tensor t = detach();
        t.set_requires_grad(node_->requires_grad);
        return t;
    }

    std::shared_ptr<TensorNode<T>>& node() { return node_; }
    const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

    static Tensor adopt(std::shared_ptr<TensorNode<T>> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

private:
    Tensor(std::vector<int> dims, std::vector<T>) {
        node_ = std::make_shared<TensorNode<T>>();
        if (dims.empty()) throw ShapeError("Tensor: dims must be non-empty");
        for (int d : dims) {
            if (d < 1) throw ShapeError("Tensor: every extent must be >= 1");
        }
        node_->data.assign(static_cast<std::size_t>(shape_numel(dims)), T(0));
        node_->dims = std::move(dims);
    }

    template <class... Ix>
    std::size_t flat_index(Ix... ix) const {
        constexpr int k = sizeof...(Ix);
        if (k != ndim()) throw ShapeError("at(): index rank mismatch");
        const std::int64_t idx[] = {static_cast<std::int64_t>(ix)...};
        std::int64_t flat = 0;
        for (int i = 0; i < k; ++i) {
            flat = flat * node_->dims[static_cast<std::size_t>(i)] + idx[i];
        }
        return static_cast<std::size_t>(flat);
    }

    std::shared_ptr<TensorNode<T>> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// tracked tensor reachable through the recorded graph; call zero_grad on
/// parameters between steps. The graph itself stays valid, so a second call
/// accumulates again.
template <class T>
void backward(const Tensor<T>& loss) {
    const auto& root = loss.node();
    if (!root) throw DataError("backward: undefined tensor");
    if (root->numel() != 1) throw ShapeError("backward: loss must be a single element");
    if (!root->backprop) throw DataError("backward: tensor has no recorded graph");

    // Post-order DFS over the DAG.
    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> seen;
    std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            TensorNode<T>* p = n->parents[next++].get();
            if (p->tracked && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

/// Stack equally-shaped tensors along a new leading axis. Data-only: the
/// result does not participate in any graph.
template <class T>
Tensor<T> stack0(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("stack0: empty input");
    std::vector<int> dims = parts[0].dims();
    for (const auto& p : parts) {
        if (p.dims() != dims) throw ShapeError("stack0: mismatched part shapes");
    }
    std::vector<int> out_dims;
    out_dims.push_back(static_cast<int>(parts.size()));
    out_dims.insert(out_dims.end(), dims.begin(), dims.end());
    Tensor<T> out = Tensor<T>::zeros(out_dims);
    const std::int64_t step = parts[0].numel();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::copy_n(parts[i].data().data(), step, out.data().data() + step * static_cast<std::int64_t>(i));
    }
    return out;
}

} // namespace led
