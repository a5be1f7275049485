#pragma once

// Dense row-major tensor with reverse-mode autodiff, templated on the
// scalar type: float is the training/decoding default, double backs the
// finite-difference gradient tests. Ops build the graph eagerly; backward()
// walks it once in reverse topological order. Graphs are per-step and die
// with the loss tensor; parameters are long-lived leaves that accumulate
// into their grad buffer until zero_grad().

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lcmt/error.hpp"

namespace lcmt {

namespace detail {

template <class S>
struct TensorImpl {
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;  // sized lazily; empty means "no grad yet"
    bool requires_grad = false;  // leaf parameter flag
    bool needs_grad = false;     // reachable from a parameter
    bool backward_done = false;  // set on the loss node after backward()

    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), S(0));
    }
};

// tape recording can be suspended (decoding, validation passes)
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

struct NoGradGuard {
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

template <class S>
class Tensor {
  public:
    using Impl = detail::TensorImpl<S>;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        return filled(std::move(shape), S(0), requires_grad);
    }

    static Tensor filled(std::vector<int> shape, S v, bool requires_grad = false) {
        check_shape(shape);
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        impl->value.assign(impl->numel(), v);
        impl->requires_grad = requires_grad;
        impl->needs_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor from(std::vector<int> shape, std::vector<S> data, bool requires_grad = false) {
        check_shape(shape);
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        int64_t n = impl->numel();
        if (static_cast<int64_t>(data.size()) != n)
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(impl->shape));
        impl->value = std::move(data);
        impl->requires_grad = requires_grad;
        impl->needs_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->numel(); }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    // rank-2 helpers
    int rows() const { return impl_->shape.size() == 2 ? impl_->shape[0] : 1; }
    int cols() const { return impl_->shape.back(); }

    std::vector<S>& value() { return impl_->value; }
    const std::vector<S>& value() const { return impl_->value; }

    S item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
        return impl_->value[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    bool needs_grad() const { return impl_->needs_grad; }
    bool has_grad() const { return !impl_->grad.empty(); }

    std::vector<S>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    const std::vector<S>& grad() const {
        impl_->ensure_grad();
        return impl_->grad;
    }

    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
    }

    // deep copy of values only (no tape linkage)
    Tensor clone_detached(bool requires_grad = false) const {
        return from(impl_->shape, impl_->value, requires_grad);
    }

    std::shared_ptr<Impl> impl() const { return impl_; }
    Impl* raw() const { return impl_.get(); }

    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  private:
    static void check_shape(const std::vector<int>& shape) {
        if (shape.empty()) throw ShapeError("empty shape is not allowed");
        for (int d : shape)
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    }

    std::shared_ptr<Impl> impl_;
};

namespace detail {

// result node constructor used by every op
template <class S>
Tensor<S> make_node(std::vector<int> shape, std::vector<S> value,
                    std::vector<Tensor<S>> parents,
                    std::function<void(TensorImpl<S>&)> backward_fn) {
    auto out = Tensor<S>::from(std::move(shape), std::move(value));
    bool track = grad_mode();
    bool any = false;
    for (const auto& p : parents) any = any || p.needs_grad();
    if (track && any) {
        auto impl = out.impl();
        impl->needs_grad = true;
        impl->backward_fn = std::move(backward_fn);
        impl->parents.reserve(parents.size());
        for (auto& p : parents) impl->parents.push_back(p.impl());
    }
    return out;
}

}  // namespace detail

// reverse-mode sweep from a scalar loss; grads accumulate into every
// reachable tensor that carries requires_grad or sits on the path to one
template <class S>
void backward(const Tensor<S>& loss) {
    auto* root = loss.raw();
    if (loss.numel() != 1)
        throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    if (!root->needs_grad)
        throw Error("backward() on a tensor not connected to any parameter with requires_grad");
    if (root->backward_done)
        throw Error("backward() called twice on the same loss without reset");

    // iterative post-order DFS
    std::vector<detail::TensorImpl<S>*> order;
    std::unordered_set<detail::TensorImpl<S>*> seen;
    struct Frame {
        detail::TensorImpl<S>* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            auto* p = f.node->parents[f.next_parent++].get();
            if (p->needs_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
    root->backward_done = true;
}

}  // namespace lcmt
