#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace glora {

// Error taxonomy. CLI maps these onto exit codes (config 2, data 3, numeric 4).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of 64-bit floats. Copies are shallow handles onto
/// shared storage; clone() makes a deep copy. Gradient storage lives beside
/// the data and is allocated lazily when an op records onto the active tape.
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<double>> data;
    // mutable: backward passes accumulate into grads held through const handles
    mutable std::shared_ptr<std::vector<double>> grad;
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(Shape s);

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double value);
    static Tensor scalar(double value);
    static Tensor from(Shape s, std::vector<double> values);
    static Tensor randn(Shape s, std::mt19937_64& rng, double sigma = 1.0, double mean = 0.0);

    bool defined() const { return static_cast<bool>(data); }
    std::size_t numel() const { return data ? data->size() : 0; }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    // 2-D views used throughout: everything but the last axis counts as rows.
    int last_dim() const { return shape.empty() ? 1 : shape.back(); }
    std::size_t rows_flat() const { return last_dim() == 0 ? 0 : numel() / static_cast<std::size_t>(last_dim()); }

    double& at(std::size_t i) { return (*data)[i]; }
    double at(std::size_t i) const { return (*data)[i]; }
    double value() const;  // numel()==1 accessor

    double* ptr() { return data->data(); }
    const double* ptr() const { return data->data(); }

    void ensure_grad() const;
    void zero_grad();
    double* grad_ptr() { return grad->data(); }
    const double* grad_ptr() const { return grad->data(); }

    /// Handle onto the same storage with gradient tracking stripped.
    Tensor detach() const;
    /// Deep copy (fresh storage, no grad, keeps requires_grad flag off).
    Tensor clone() const;

    bool all_finite() const;
    bool same_bits(const Tensor& other) const;
};

/// Ordered record of executed ops. Constructing a Tape installs it as the
/// active tape for the current thread; destruction restores the previous one.
/// backward() replays the entries in exact reverse execution order.
/// Independent graphs on different threads never share a tape.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::function<void()> backward_fn);
    std::size_t size() const { return entries_.size(); }
    bool backward_done() const { return backward_done_; }

    void run_backward(Tensor& loss);

private:
    std::vector<std::function<void()>> entries_;
    bool backward_done_ = false;
    Tape* previous_ = nullptr;
};

/// Seeds d(loss)/d(loss)=1 and propagates adjoints to every reachable
/// requires_grad tensor. Requires a scalar loss and an active tape; calling
/// twice on the same tape is a contract error.
void backward(Tensor& loss);

}  // namespace glora
