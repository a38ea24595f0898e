#include "glora/tensor.hpp"

#include <cmath>
#include <sstream>

namespace glora {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("shape extent must be positive, got " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
    data = std::make_shared<std::vector<double>>(shape_numel(shape), 0.0);
    // Grad storage is allocated up front so every copy of this handle shares
    // one accumulator; backward closures capture handles by value.
    grad = std::make_shared<std::vector<double>>(data->size(), 0.0);
}

Tensor Tensor::zeros(Shape s) { return Tensor(std::move(s)); }

Tensor Tensor::full(Shape s, double value) {
    Tensor t(std::move(s));
    for (auto& v : *t.data) v = value;
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t(Shape{1});
    (*t.data)[0] = value;
    return t;
}

Tensor Tensor::from(Shape s, std::vector<double> values) {
    if (shape_numel(s) != values.size()) {
        throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " + shape_str(s));
    }
    Tensor t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.grad = std::make_shared<std::vector<double>>(t.data->size(), 0.0);
    return t;
}

Tensor Tensor::randn(Shape s, std::mt19937_64& rng, double sigma, double mean) {
    Tensor t(std::move(s));
    std::normal_distribution<double> dist(mean, sigma);
    for (auto& v : *t.data) v = dist(rng);
    return t;
}

double Tensor::value() const {
    if (numel() != 1) throw ContractError("value() requires a scalar tensor, shape is " + shape_str(shape));
    return (*data)[0];
}

void Tensor::ensure_grad() const {
    if (!grad) grad = std::make_shared<std::vector<double>>(numel(), 0.0);
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    t.grad = grad;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(*data);
    t.grad = std::make_shared<std::vector<double>>(t.data->size(), 0.0);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : *data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool Tensor::same_bits(const Tensor& other) const {
    if (shape != other.shape) return false;
    const auto& a = *data;
    const auto& b = *other.data;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i] || std::signbit(a[i]) != std::signbit(b[i])) return false;
    }
    return true;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
    previous_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_fn) {
    entries_.push_back(std::move(backward_fn));
}

void Tape::run_backward(Tensor& loss) {
    if (backward_done_) throw ContractError("backward called twice on the same tape; create a fresh tape to reset");
    if (loss.numel() != 1) throw ContractError("backward requires a scalar loss, shape is " + shape_str(loss.shape));
    loss.ensure_grad();
    (*loss.grad)[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    backward_done_ = true;
}

void backward(Tensor& loss) {
    Tape* tape = Tape::active();
    if (!tape) throw ContractError("backward requires an active tape");
    tape->run_backward(loss);
}

}  // namespace glora
