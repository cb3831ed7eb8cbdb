#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "flownas/errors.hpp"

namespace flownas {

// Activations laid out [batch, length, channels], channels contiguous.
struct BatchTensor {
    long batch = 0;
    long length = 0;
    long channels = 0;
    std::vector<double> data;

    BatchTensor() = default;
    BatchTensor(long b, long l, long c) : batch(b), length(l), channels(c), data(size_t(b * l * c), 0.0) {}

    long size() const { return batch * length * channels; }

    double* row(long b, long t) { return data.data() + (b * length + t) * channels; }
    const double* row(long b, long t) const { return data.data() + (b * length + t) * channels; }

    double& at(long b, long t, long c) { return data[size_t((b * length + t) * channels + c)]; }
    double at(long b, long t, long c) const { return data[size_t((b * length + t) * channels + c)]; }

    void require_shape(long b, long l, long c, const char* where) const {
        if (batch != b || length != l || channels != c)
            throw ShapeMismatch(std::string(where) + ": expected [" + std::to_string(b) + "," +
                                std::to_string(l) + "," + std::to_string(c) + "], got [" +
                                std::to_string(batch) + "," + std::to_string(length) + "," +
                                std::to_string(channels) + "]");
    }

    void assert_finite(const char* where) const {
        for (double v : data)
            if (!std::isfinite(v))
                throw NonFiniteActivation(std::string("non-finite activation in ") + where);
    }
};

// Named parameter tensor with its gradient buffer.
struct Tensor {
    std::string name;
    std::vector<long> dims;
    std::vector<double> value;
    std::vector<double> grad;

    Tensor() = default;
    Tensor(std::string n, std::vector<long> d) : name(std::move(n)), dims(std::move(d)) {
        long total = 1;
        for (long x : dims) total *= x;
        value.assign(size_t(total), 0.0);
        grad.assign(size_t(total), 0.0);
    }

    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

} // namespace flownas
