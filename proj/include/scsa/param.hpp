#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "scsa/error.hpp"
#include "scsa/tensor.hpp"

namespace scsa {

// Named learnable tensor with a paired gradient accumulator.
template <class T>
struct ParameterT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    ParameterT(std::string n, TensorT<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

using Parameter = ParameterT<double>;

// Owns parameters and non-learnable buffers (running statistics). Iteration
// order is insertion order, which keeps optimizer updates and checkpoint
// layout deterministic.
template <class T>
class ParamStoreT {
  public:
    ParameterT<T>* add(const std::string& name, TensorT<T> value) {
        if (by_name_.count(name)) {
            throw ConfigError("duplicate parameter name: " + name);
        }
        params_.push_back(std::make_unique<ParameterT<T>>(name, std::move(value)));
        ParameterT<T>* p = params_.back().get();
        by_name_[name] = p;
        return p;
    }

    TensorT<T>* add_buffer(const std::string& name, TensorT<T> value) {
        if (buffers_by_name_.count(name)) {
            throw ConfigError("duplicate buffer name: " + name);
        }
        buffers_.push_back({name, std::make_unique<TensorT<T>>(std::move(value))});
        TensorT<T>* b = buffers_.back().second.get();
        buffers_by_name_[name] = b;
        return b;
    }

    ParameterT<T>* find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : it->second;
    }

    TensorT<T>* find_buffer(const std::string& name) const {
        auto it = buffers_by_name_.find(name);
        return it == buffers_by_name_.end() ? nullptr : it->second;
    }

    // Parameters in insertion order.
    std::vector<ParameterT<T>*> ordered() const {
        std::vector<ParameterT<T>*> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(p.get());
        return out;
    }

    std::vector<std::pair<std::string, const TensorT<T>*>> ordered_buffers() const {
        std::vector<std::pair<std::string, const TensorT<T>*>> out;
        out.reserve(buffers_.size());
        for (const auto& [name, buf] : buffers_) out.emplace_back(name, buf.get());
        return out;
    }

    std::size_t size() const { return params_.size(); }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

  private:
    std::vector<std::unique_ptr<ParameterT<T>>> params_;
    std::unordered_map<std::string, ParameterT<T>*> by_name_;
    std::vector<std::pair<std::string, std::unique_ptr<TensorT<T>>>> buffers_;
    std::unordered_map<std::string, TensorT<T>*> buffers_by_name_;
};

using ParamStore = ParamStoreT<double>;

}  // namespace scsa
