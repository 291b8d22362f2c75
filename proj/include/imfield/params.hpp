#pragma once

#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "imfield/autodiff.hpp"
#include "imfield/tensor.hpp"

namespace imfield {

struct AdamConfig {
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Named trainable tensors plus their Adam moments. One training loop owns a
// store exclusively; the step counter is shared across all parameters.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<float> value;
        Tensor<float> m, v;
    };

    explicit ParamStore(AdamConfig adam = {}) : adam_(adam) {}

    Entry& add(const std::string& name, Tensor<float> init) {
        if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
        Entry e;
        e.name = name;
        e.m = Tensor<float>::zeros(init.shape);
        e.v = Tensor<float>::zeros(init.shape);
        e.value = std::move(init);
        index_[name] = entries_.size();
        entries_.push_back(std::move(e));
        return entries_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Entry& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second];
    }
    const Entry& get(const std::string& name) const {
        return const_cast<ParamStore*>(this)->get(name);
    }

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    int64_t step() const { return step_; }
    void set_step(int64_t t) { step_ = t; }
    AdamConfig& adam() { return adam_; }
    const AdamConfig& adam() const { return adam_; }

    // One bias-corrected Adam update over the given (name, gradient) pairs.
    // Parameters without a gradient entry are left untouched.
    void adam_step(const std::vector<std::pair<std::string, Tensor<float>>>& grads) {
        ++step_;
        double bc1 = 1.0 - std::pow(double(adam_.beta1), double(step_));
        double bc2 = 1.0 - std::pow(double(adam_.beta2), double(step_));
        for (const auto& [name, g] : grads) {
            Entry& e = get(name);
            if (!g.same_shape(e.value))
                throw ShapeError("gradient shape " + g.shape_str() + " for parameter '" + name +
                                 "' " + e.value.shape_str());
            for (size_t i = 0; i < g.data.size(); ++i) {
                float gi = g.data[i];
                if (!std::isfinite(gi))
                    throw TrainError("non-finite gradient for parameter '" + name + "'");
                float& m = e.m.data[i];
                float& v = e.v.data[i];
                m = adam_.beta1 * m + (1.0f - adam_.beta1) * gi;
                v = adam_.beta2 * v + (1.0f - adam_.beta2) * gi * gi;
                float mhat = float(m / bc1);
                float vhat = float(v / bc2);
                e.value.data[i] -= adam_.lr * mhat / (std::sqrt(vhat) + adam_.eps);
            }
        }
    }

    std::map<std::string, Tensor<double>> as_doubles() const {
        std::map<std::string, Tensor<double>> out;
        for (const auto& e : entries_) out[e.name] = e.value.template cast<double>();
        return out;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
    AdamConfig adam_;
    int64_t step_ = 0;
};

// Glorot-style uniform init: U(-s, s), s = sqrt(6 / (fan_in + fan_out)).
inline Tensor<float> glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    double s = std::sqrt(6.0 / (double(fan_in) + double(fan_out)));
    Tensor<float> t = Tensor<float>::zeros(std::move(shape));
    for (float& v : t.data) v = float(rng.uniform(-s, s));
    return t;
}

// Binds store parameters into a graph as grad-requiring leaves, remembering
// the (name, node) pairs so the training loop can collect gradients.
template <class T>
class ParamBinder {
public:
    ParamBinder(Graph<T>& g, std::function<Tensor<T>(const std::string&)> fetch)
        : g_(&g), fetch_(std::move(fetch)) {}

    static ParamBinder from_store(Graph<T>& g, const ParamStore& store) {
        return ParamBinder(g, [&store](const std::string& name) {
            return store.get(name).value.template cast<T>();
        });
    }

    NodeId operator()(const std::string& name) {
        NodeId id = g_->leaf(fetch_(name), true);
        bound_.emplace_back(name, id);
        return id;
    }

    const std::vector<std::pair<std::string, NodeId>>& bound() const { return bound_; }

    // Collects float gradients for the bound parameters after backward().
    std::vector<std::pair<std::string, Tensor<float>>> gradients(Graph<T>& g, NodeId loss) const {
        std::vector<NodeId> ids;
        ids.reserve(bound_.size());
        for (auto& [name, id] : bound_) ids.push_back(id);
        std::vector<NodeId> grads = g.backward(loss, ids);
        std::vector<std::pair<std::string, Tensor<float>>> out;
        out.reserve(bound_.size());
        for (size_t i = 0; i < bound_.size(); ++i)
            out.emplace_back(bound_[i].first, g.value(grads[i]).template cast<float>());
        return out;
    }

private:
    Graph<T>* g_;
    std::function<Tensor<T>(const std::string&)> fetch_;
    std::vector<std::pair<std::string, NodeId>> bound_;
};

}  // namespace imfield
