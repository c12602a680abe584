#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rlms {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    // Set when a backward pass (or a leaf accumulation) has written into grad.
    bool grad_live = false;
    // Tape that produced this tensor; null for leaves.
    const Tape<T>* tape = nullptr;
};

}  // namespace detail

// Dense row-major array. Copies are shallow handles onto the same storage;
// use clone() for an independent copy.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor();
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
    static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t dim() const { return impl_->shape.size(); }
    std::size_t size(std::size_t axis) const;
    std::size_t numel() const { return impl_->data.size(); }

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    T* ptr() { return impl_->data.data(); }
    const T* ptr() const { return impl_->data.data(); }
    T item() const;
    T at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool flag);

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const T> grad() const { return impl_->grad; }
    // Allocates a zero gradient buffer on first use.
    std::span<T> mutable_grad();
    void zero_grad();
    void clear_grad();
    Tensor grad_tensor() const;

    Tensor detach() const;
    Tensor clone() const;
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> values(impl_->data.begin(), impl_->data.end());
        return Tensor<U>(impl_->shape, std::move(values));
    }

    detail::TensorImpl<T>& impl() const { return *impl_; }
    const std::shared_ptr<detail::TensorImpl<T>>& impl_ptr() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Disables recording on every tape of every element type in this thread.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool grad_enabled();

private:
    bool previous_;
};

// Define-by-run gradient tape. Constructing a tape makes it the active
// recorder for its element type in the current thread until it is destroyed.
// Nodes are kept in forward execution order; backward() walks them in
// reverse, visiting each node at most once per call.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(std::span<const T> grad_out)>;

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // Leaf gradients accumulate across calls; intermediate gradients are
    // recomputed on each call.
    void backward(const Tensor<T>& scalar_output);

    std::size_t size() const { return nodes_.size(); }

    // Attaches `out` to this tape. Called by ops after the forward result exists.
    void record(Tensor<T>& out, BackwardFn fn);

private:
    struct Node {
        std::shared_ptr<detail::TensorImpl<T>> out;
        BackwardFn fn;
    };

    std::vector<Node> nodes_;
    Tape* previous_;
};

namespace detail {

// True when an active tape exists, recording is enabled, and any input needs grad.
template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
    if (Tape<T>::active() == nullptr || !NoGradGuard::grad_enabled()) return false;
    for (const Tensor<T>* t : inputs) {
        if (t != nullptr && t->defined() && t->requires_grad()) return true;
    }
    return false;
}

// Gradient buffer of an input inside a backward closure; marks it live.
template <typename T>
std::span<T> grad_sink(const Tensor<T>& input) {
    auto& impl = input.impl();
    if (impl.grad.size() != impl.data.size()) impl.grad.assign(impl.data.size(), T(0));
    impl.grad_live = true;
    return impl.grad;
}

}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace rlms
