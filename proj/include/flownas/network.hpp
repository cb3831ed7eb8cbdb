#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flownas/arch.hpp"
#include "flownas/cost.hpp"
#include "flownas/layers.hpp"

namespace flownas {

// A trainable instance of one architecture. Layer order per block is
// conv -> batch norm -> ReLU -> pool -> dropout, head is GAP -> dense;
// softmax lives in the loss and in predict().
class Network {
public:
    explicit Network(const Architecture& arch, uint64_t init_seed = 0) : arch_(arch) {
        infer_shapes(arch); // reject degenerate genomes up front
        long channels = arch.input_channels;
        for (size_t i = 0; i < arch.blocks.size(); ++i) {
            const auto& b = arch.blocks[i];
            std::string prefix = "block" + std::to_string(i);
            auto conv = std::make_unique<Conv1D>(prefix + "/conv", channels, b.filters, b.kernel,
                                                 b.stride, b.padding);
            conv_layers_.push_back(conv.get());
            layers_.push_back(std::move(conv));
            auto bn = std::make_unique<BatchNorm>(prefix + "/bn", b.filters);
            bn_layers_.push_back(bn.get());
            layers_.push_back(std::move(bn));
            layers_.push_back(std::make_unique<ReLU>());
            if (b.pool.enabled()) {
                if (b.pool.kind == PoolKind::max)
                    layers_.push_back(std::make_unique<MaxPool>(b.pool.size, b.pool.stride, b.pool.padding));
                else
                    layers_.push_back(std::make_unique<AvgPool>(b.pool.size, b.pool.stride, b.pool.padding));
            }
            if (b.dropout_rate > 0.0)
                layers_.push_back(std::make_unique<Dropout>(b.dropout_rate, &dropout_rng_));
            channels = b.filters;
        }
        layers_.push_back(std::make_unique<GlobalAvgPool>());
        auto dense = std::make_unique<Dense>("head/dense", channels, arch.n_classes);
        dense_ = dense.get();
        layers_.push_back(std::move(dense));

        for (auto& layer : layers_) layer->collect(tensors_, trainable_);
        init_weights(init_seed);
    }

    Network(const Network& other) : Network(other.arch_, 0) {
        auto src = other.tensors_;
        for (size_t i = 0; i < tensors_.size(); ++i) tensors_[i]->value = src[i]->value;
        dropout_rng_ = other.dropout_rng_;
    }

    Network& operator=(const Network& other) = delete;

    const Architecture& arch() const { return arch_; }

    void init_weights(uint64_t seed) {
        Rng rng(seed);
        for (auto* conv : conv_layers_) conv->init(rng);
        dense_->init(rng);
        dropout_rng_.seed(derive_seed(seed, 0x4d61736bull));
    }

    void reseed_dropout(uint64_t seed) { dropout_rng_.seed(seed); }

    void set_bn_update(bool update) {
        for (auto* bn : bn_layers_) bn->update_running = update;
    }

    BatchTensor forward(const BatchTensor& input, Mode mode) {
        check_input(input);
        activations_.clear();
        activations_.reserve(layers_.size() + 1);
        activations_.push_back(input);
        for (auto& layer : layers_)
            activations_.push_back(layer->forward(activations_.back(), mode));
        activations_.back().assert_finite("logits");
        return activations_.back();
    }

    // Mean softmax cross-entropy; accumulates gradients into every trainable
    // tensor (call zero_grads() first for a fresh step). correct_out, when
    // given, receives the batch's argmax hit count from the same forward.
    double loss_and_grad(const BatchTensor& input, std::span<const uint16_t> labels,
                         long* correct_out = nullptr) {
        auto logits = forward(input, Mode::train);
        if (correct_out) {
            long correct = 0;
            for (long b = 0; b < logits.batch; ++b) {
                const double* z = logits.row(b, 0);
                int best = 0;
                for (long c = 1; c < logits.channels; ++c)
                    if (z[c] > z[best]) best = int(c);
                if (best == int(labels[size_t(b)])) ++correct;
            }
            *correct_out = correct;
        }
        auto loss = softmax_cross_entropy(logits, labels);
        BatchTensor grad = std::move(loss.dlogits);
        for (size_t i = layers_.size(); i-- > 0;)
            grad = layers_[i]->backward(activations_[i], activations_[i + 1], grad);
        return loss.loss;
    }

    void zero_grads() {
        for (auto* t : trainable_) t->zero_grad();
    }

    std::vector<Tensor*>& tensors() { return tensors_; }
    std::vector<Tensor*>& trainable() { return trainable_; }

    const Tensor* find_tensor(const std::string& name) const {
        for (auto* t : tensors_)
            if (t->name == name) return t;
        return nullptr;
    }

    Tensor* find_tensor(const std::string& name) {
        for (auto* t : tensors_)
            if (t->name == name) return t;
        return nullptr;
    }

    std::vector<int> predict(const BatchTensor& input) {
        auto logits = forward(input, Mode::eval);
        std::vector<int> out(size_t(logits.batch));
        for (long b = 0; b < logits.batch; ++b) {
            const double* z = logits.row(b, 0);
            int best = 0;
            for (long c = 1; c < logits.channels; ++c)
                if (z[c] > z[best]) best = int(c);
            out[size_t(b)] = best;
        }
        return out;
    }

private:
    void check_input(const BatchTensor& input) const {
        if (input.length != arch_.input_len || input.channels != arch_.input_channels)
            throw ShapeMismatch("input [" + std::to_string(input.length) + "," +
                                std::to_string(input.channels) + "] does not match architecture [" +
                                std::to_string(arch_.input_len) + "," +
                                std::to_string(arch_.input_channels) + "]");
    }

    Architecture arch_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<Conv1D*> conv_layers_;
    std::vector<BatchNorm*> bn_layers_;
    Dense* dense_ = nullptr;
    std::vector<Tensor*> tensors_;
    std::vector<Tensor*> trainable_;
    std::vector<BatchTensor> activations_;
    Rng dropout_rng_{0};
};

} // namespace flownas
