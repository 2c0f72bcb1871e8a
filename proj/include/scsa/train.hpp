#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "scsa/backbone.hpp"
#include "scsa/dataset.hpp"

namespace scsa {

struct TrainSpec {
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<std::size_t> lr_drop_epochs = {12, 18};  // 1-based
    double lr_drop_factor = 0.1;
    std::size_t batch_size = 16;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
        if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
        if (batch_size == 0 || epochs == 0) throw ConfigError("train: batch_size/epochs must be >= 1");
        if (lr_drop_factor <= 0.0) throw ConfigError("train: lr_drop_factor must be > 0");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    bool diverged = false;
    std::size_t diverged_epoch = 0;
};

// Single-threaded SGD with momentum and weight decay; bit-reproducible for
// a fixed seed. Divergence (non-finite loss) stops the run and is reported
// with its epoch index.
TrainLog train(TinyBackbone& net, const Dataset& train_set, const Dataset& val_set,
               const TrainSpec& spec);

double evaluate_accuracy(TinyBackbone& net, const Dataset& ds, std::size_t batch_size = 32);

// One line per epoch: "epoch=<n> train_loss=<loss> val_acc=<acc>"
void write_train_log(std::ostream& os, const TrainLog& log);

}  // namespace scsa
