#pragma once

#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "scsa/param.hpp"
#include "scsa/tensor.hpp"

namespace scsa {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

// Op identifiers for tape entries. Doubles as the registry of every
// operation that declares a backward pass: the gradcheck suite iterates
// this enum exhaustively, so a new op cannot silently miss coverage.
enum class OpKind : int {
    AvgPoolOverHeight = 0,
    AvgPoolOverWidth,
    ChannelSlice,
    ConcatChannels,
    DwConv1d,
    GroupNorm,
    BatchNorm1d,
    Sigmoid,
    SoftmaxLastDim,
    AdaptiveAvgPool2d,
    PerChannelAffine,
    BatchedMatmul,
    TransposeLast2,
    BroadcastMul3,
    ChannelShuffle,
    MeanLastDim,
    Scale,
    MulChannelGate,
    Reshape,
    Conv2d,
    Relu,
    Add,
    Linear,
    SoftmaxCrossEntropy,
    Count_  // sentinel
};

inline constexpr int kOpKindCount = static_cast<int>(OpKind::Count_);

const char* op_kind_name(OpKind kind);

// Record of one executed forward op: the ids it read, the id it produced,
// and a closure that propagates the output gradient to the input gradients.
// The closure receives the output node id and must accumulate (+=) into the
// gradients of the nodes it read.
//
// A tape is single-writer: record the forward, then run backward once.
// Values live on the tape so backward closures can read saved inputs.
template <class T>
class TapeT {
  public:
    using BackwardFn = std::function<void(TapeT&, NodeId out)>;

    NodeId input(TensorT<T> value) {
        values_.push_back(std::move(value));
        grads_.emplace_back();
        return values_.size() - 1;
    }

    // Registers a parameter as a leaf. Repeated watches of the same
    // parameter return the same node, so gradients from every use site
    // accumulate together (this is what ties shared convolution kernels).
    NodeId watch(ParameterT<T>& p) {
        auto it = watched_.find(&p);
        if (it != watched_.end()) return it->second;
        NodeId id = input(p.value);
        watched_[&p] = id;
        watch_order_.push_back(&p);
        return id;
    }

    NodeId emit(TensorT<T> value, OpKind kind, BackwardFn backward) {
        NodeId id = input(std::move(value));
        entries_.push_back({kind, std::move(backward), id});
        return id;
    }

    const TensorT<T>& value(NodeId id) const { return values_[id]; }

    // Gradient buffer for a node, allocated as zeros on first touch.
    TensorT<T>& grad(NodeId id) {
        if (grads_[id].numel() == 0) {
            grads_[id] = TensorT<T>(values_[id].shape);
        }
        return grads_[id];
    }

    bool has_grad(NodeId id) const { return grads_[id].numel() != 0; }

    // Reverse sweep seeded with `seed` as d(root). Visits entries in exact
    // reverse execution order, then flushes accumulated gradients of every
    // watched parameter into Parameter::grad.
    void backward(NodeId root, const TensorT<T>& seed) {
        if (backward_done_) {
            throw ConfigError("tape backward may run only once");
        }
        backward_done_ = true;
        if (seed.shape != values_[root].shape) {
            throw ShapeError("backward seed shape " + seed.shape.str() +
                             " does not match root shape " + values_[root].shape.str());
        }
        grad(root) = seed;
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
            if (!has_grad(it->out)) continue;  // output off the path to root
            it->fn(*this, it->out);
        }
        for (ParameterT<T>* p : watch_order_) {
            NodeId id = watched_[p];
            if (!has_grad(id)) continue;  // param never reached the root
            const TensorT<T>& g = grads_[id];
            for (std::size_t i = 0; i < g.numel(); ++i) p->grad.data[i] += g.data[i];
        }
    }

    void backward_scalar(NodeId root) {
        if (values_[root].numel() != 1) {
            throw ShapeError("backward_scalar requires a single-element root");
        }
        backward(root, TensorT<T>::full(values_[root].shape, T(1)));
    }

    std::size_t num_entries() const { return entries_.size(); }
    OpKind entry_kind(std::size_t i) const { return entries_[i].kind; }

    // Test hook: scales the gradient this entry emits by `factor`, which
    // fakes a broken backward pass for the gradcheck negative control.
    void debug_scale_backward(std::size_t entry_index, T factor) {
        BackwardFn original = std::move(entries_[entry_index].fn);
        entries_[entry_index].fn = [original = std::move(original), factor](TapeT& t, NodeId out) {
            auto& g = t.grad(out);
            for (auto& v : g.data) v *= factor;
            original(t, out);
        };
    }

  private:
    struct Entry {
        OpKind kind;
        BackwardFn fn;
        NodeId out;
    };

    std::vector<TensorT<T>> values_;
    std::vector<TensorT<T>> grads_;
    std::vector<Entry> entries_;
    std::unordered_map<ParameterT<T>*, NodeId> watched_;
    std::vector<ParameterT<T>*> watch_order_;
    bool backward_done_ = false;
};

using Tape = TapeT<double>;
using TapeF = TapeT<float>;

}  // namespace scsa
