#include "scsa/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "scsa/ops.hpp"
#include "scsa/rng.hpp"

namespace scsa {

namespace {

Tensor gather_batch(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t begin,
                    std::size_t end, std::vector<int>& labels_out) {
    const Shape s = ds.images.shape;
    const std::size_t C = s[1], H = s[2], W = s[3];
    const std::size_t per = C * H * W;
    Tensor batch(Shape{end - begin, C, H, W});
    labels_out.clear();
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = order[i];
        std::copy(ds.images.data.begin() + src * per, ds.images.data.begin() + (src + 1) * per,
                  batch.data.begin() + (i - begin) * per);
        labels_out.push_back(ds.labels[src]);
    }
    return batch;
}

}  // namespace

double evaluate_accuracy(TinyBackbone& net, const Dataset& ds, std::size_t batch_size) {
    std::size_t correct = 0;
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        const std::size_t end = std::min(ds.size(), begin + batch_size);
        Tensor batch = gather_batch(ds, order, begin, end, labels);
        Tape tape;
        NodeId logits = net.forward(tape, tape.input(std::move(batch)));
        const Tensor& out = tape.value(logits);
        const std::size_t K = out.shape[1];
        for (std::size_t b = 0; b < end - begin; ++b) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < K; ++k) {
                if (out.at2(b, k) > out.at2(b, best)) best = k;
            }
            if (static_cast<int>(best) == labels[b]) ++correct;
        }
    }
    return ds.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainLog train(TinyBackbone& net, const Dataset& train_set, const Dataset& val_set,
               const TrainSpec& spec) {
    spec.validate();
    if (train_set.size() == 0) throw ConfigError("train: empty training set");

    TrainLog log;
    Rng shuffle_rng(spec.seed);
    auto params = net.store().ordered();
    std::vector<Tensor> velocity;
    velocity.reserve(params.size());
    for (const Parameter* p : params) velocity.emplace_back(p->value.shape);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= spec.epochs; ++epoch) {
        double lr = spec.lr;
        for (std::size_t drop : spec.lr_drop_epochs) {
            if (epoch >= drop) lr *= spec.lr_drop_factor;
        }
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::vector<int> labels;
        for (std::size_t begin = 0; begin < train_set.size(); begin += spec.batch_size) {
            const std::size_t end = std::min(train_set.size(), begin + spec.batch_size);
            Tensor batch = gather_batch(train_set, order, begin, end, labels);
            net.store().zero_grads();
            Tape tape;
            NodeId logits = net.forward(tape, tape.input(std::move(batch)));
            NodeId loss = ops::softmax_cross_entropy(tape, logits, labels);
            const double loss_val = tape.value(loss)[0];
            if (!std::isfinite(loss_val)) {
                log.diverged = true;
                log.diverged_epoch = epoch;
                return log;
            }
            loss_sum += loss_val * static_cast<double>(end - begin);
            tape.backward_scalar(loss);
            for (std::size_t i = 0; i < params.size(); ++i) {
                Parameter* p = params[i];
                Tensor& v = velocity[i];
                for (std::size_t j = 0; j < p->value.numel(); ++j) {
                    const double g = p->grad.data[j] + spec.weight_decay * p->value.data[j];
                    v.data[j] = spec.momentum * v.data[j] + g;
                    p->value.data[j] -= lr * v.data[j];
                }
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.val_acc = evaluate_accuracy(net, val_set);
        log.epochs.push_back(rec);
    }
    return log;
}

void write_train_log(std::ostream& os, const TrainLog& log) {
    os.precision(12);
    for (const auto& rec : log.epochs) {
        os << "epoch=" << rec.epoch << " train_loss=" << rec.train_loss
           << " val_acc=" << rec.val_acc << "\n";
    }
    if (log.diverged) {
        os << "diverged at epoch " << log.diverged_epoch << "\n";
    }
}

}  // namespace scsa
