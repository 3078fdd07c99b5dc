#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void str_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void str_append(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    str_append(os, rest...);
}

template <typename... Args>
std::string str(const Args&... args) {
    std::ostringstream os;
    str_append(os, args...);
    return os.str();
}

} // namespace detail

template <typename... Args>
[[noreturn]] inline void fail(const Args&... args) {
    throw Error(detail::str(args...));
}

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

/// Dense multi-dimensional value participating in reverse-mode
/// differentiation. Copying a Tensor copies the handle; value and grad
/// storage are shared.
class Tensor {
    struct Impl {
        std::vector<int> shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = true;
    };

public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = true) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        std::size_t n = 1;
        for (int d : t.impl_->shape) {
            if (d <= 0) fail("tensor dimension must be positive, got shape ", shape_string(t.impl_->shape));
            n *= static_cast<std::size_t>(d);
        }
        t.impl_->value.assign(n, 0.0);
        t.impl_->grad.assign(n, 0.0);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = true) {
        Tensor t = zeros(std::move(shape), requires_grad);
        if (values.size() != t.size())
            fail("value count ", values.size(), " does not match shape ", shape_string(t.shape()));
        t.impl_->value = std::move(values);
        return t;
    }

    static Tensor scalar(double v, bool requires_grad = true) {
        return from({1}, {v}, requires_grad);
    }

    /// Uniform init on [-range, range].
    static Tensor uniform(std::vector<int> shape, double range, std::mt19937& rng, bool requires_grad = true) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::uniform_real_distribution<double> dist(-range, range);
        for (double& v : t.impl_->value) v = dist(rng);
        return t;
    }

    /// Xavier-style init: range sqrt(6 / (fan_in + fan_out)) for matrices,
    /// sqrt(3 / dim) for vectors.
    static Tensor glorot(std::vector<int> shape, std::mt19937& rng, bool requires_grad = true) {
        double fan_in = static_cast<double>(shape.size() >= 2 ? shape[shape.size() - 2] : shape.back());
        double fan_out = static_cast<double>(shape.back());
        double range = std::sqrt(6.0 / (fan_in + fan_out));
        return uniform(std::move(shape), range, rng, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->value.size(); }
    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

    std::vector<double>& value() { return impl_->value; }
    const std::vector<double>& value() const { return impl_->value; }

    double& at(int i) { return impl_->value[static_cast<std::size_t>(i)]; }
    double at(int i) const { return impl_->value[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return impl_->value[offset(i, j)]; }
    double at(int i, int j) const { return impl_->value[offset(i, j)]; }
    double& at(int i, int j, int k) { return impl_->value[offset(i, j, k)]; }
    double at(int i, int j, int k) const { return impl_->value[offset(i, j, k)]; }

    // The gradient is shared accumulator state: backward closures write it
    // through value-captured handles, so access is const-callable.
    std::vector<double>& grad() const { return impl_->grad; }
    double& grad_at(int i) const { return impl_->grad[static_cast<std::size_t>(i)]; }
    double& grad_at(int i, int j) const { return impl_->grad[offset(i, j)]; }
    double& grad_at(int i, int j, int k) const { return impl_->grad[offset(i, j, k)]; }

    void zero_grad() const { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

    /// Identity of the underlying storage; used to detect aliasing.
    const void* id() const { return impl_.get(); }

    std::size_t offset(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(impl_->shape[1]) + static_cast<std::size_t>(j);
    }
    std::size_t offset(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(impl_->shape[1]) + static_cast<std::size_t>(j))
                   * static_cast<std::size_t>(impl_->shape[2])
               + static_cast<std::size_t>(k);
    }

private:
    std::shared_ptr<Impl> impl_;
};

/// Ordered record of executed operations. Recording order is topological
/// order by construction: an op's operands exist before the op runs.
/// One backward() call visits every node exactly once, in reverse.
class Tape {
public:
    template <typename F>
    void record(F&& backward_fn) {
        nodes_.emplace_back(std::forward<F>(backward_fn));
    }

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
    /// Returns the number of nodes visited.
    std::size_t backward(Tensor loss) {
        if (loss.size() != 1)
            fail("backward expects a scalar loss, got shape ", shape_string(loss.shape()));
        loss.grad()[0] += 1.0;
        std::size_t visited = 0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            (*it)();
            ++visited;
        }
        return visited;
    }

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
};

enum class Mode { Train, Eval };

} // namespace sfa
