#include "rlms/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "rlms/error.hpp"

namespace rlms {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

template <typename T>
Tensor<T>::Tensor() : Tensor(Shape{0}) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
}

template <typename T>
std::size_t Tensor<T>::size(std::size_t axis) const {
    if (axis >= impl_->shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(impl_->shape));
    }
    return impl_->shape[axis];
}

template <typename T>
T Tensor<T>::item() const {
    if (impl_->data.size() != 1) {
        throw ContractError("item() on tensor of shape " + shape_str(impl_->shape));
    }
    return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    return *this;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
    if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::clear_grad() {
    impl_->grad.clear();
    impl_->grad_live = false;
}

template <typename T>
Tensor<T> Tensor<T>::grad_tensor() const {
    if (impl_->grad.empty()) return Tensor(impl_->shape);
    return Tensor(impl_->shape, impl_->grad);
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return Tensor(impl_->shape, impl_->data);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    Tensor copy(impl_->shape, impl_->data);
    copy.impl_->requires_grad = impl_->requires_grad;
    return copy;
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
    g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
    g_grad_enabled = previous_;
}

bool NoGradGuard::grad_enabled() {
    return g_grad_enabled;
}

namespace {
template <typename T>
Tape<T>*& active_slot() {
    thread_local Tape<T>* slot = nullptr;
    return slot;
}
}  // namespace

template <typename T>
Tape<T>::Tape() : previous_(active_slot<T>()) {
    active_slot<T>() = this;
}

template <typename T>
Tape<T>::~Tape() {
    active_slot<T>() = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
    return active_slot<T>();
}

template <typename T>
void Tape<T>::record(Tensor<T>& out, BackwardFn fn) {
    auto& impl = out.impl();
    impl.requires_grad = true;
    impl.tape = this;
    nodes_.push_back(Node{out.impl_ptr(), std::move(fn)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& scalar_output) {
    if (scalar_output.numel() != 1) {
        throw ContractError("backward() needs a single-element output, got shape " +
                            shape_str(scalar_output.shape()));
    }
    auto& root = scalar_output.impl();
    if (root.tape != this) {
        throw ContractError("backward() output is not attached to this tape");
    }
    for (Node& node : nodes_) {
        node.out->grad.assign(node.out->data.size(), T(0));
        node.out->grad_live = false;
    }
    root.grad[0] = T(1);
    root.grad_live = true;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->out->grad_live) continue;
        it->fn(it->out->grad);
    }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace rlms
