#pragma once

#include <functional>

#include "dataio.hpp"
#include "model.hpp"

namespace glim {

struct OptimHyper {
    double lr0 = 1e-3;
    double decay_gamma = 0.975;
    int step_epochs = 2;
    double alpha = 0.9;         // squared-gradient smoothing
    double momentum = 0.9;
    double weight_decay = 1e-5;
    double eps = 1e-8;
};

// Staircase decay: lr0 * gamma^floor(epoch / step_epochs), epoch 0-based.
double lr_at_epoch(const OptimHyper& h, int epoch);

// g <- grad + wd*p; v <- a*v + (1-a)*g^2; b <- mu*b + g/(sqrt(v)+eps); p <- p - lr*b
template <typename T>
void rmsprop_step(ParamStore<T>& store, T lr, const OptimHyper& h);

struct Metrics {
    double accuracy = 0, weighted_f1 = 0, mean_loss = 0;
    std::vector<std::vector<long long>> confusion;  // [true][pred]
    std::vector<double> precision, recall, f1;
    std::vector<long long> support;
};

// Undefined ratios (empty column/row, P+R=0) resolve to 0.
Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                        int num_classes);

TensorF hflip_image(const TensorF& img);

struct TrainOptions {
    int epochs = 300;
    int batch = 64;
    uint64_t seed = 42;
    bool hflip = false;
    OptimHyper opt;
};

struct EpochStat {
    int epoch;  // 1-based in reports
    double lr, loss, train_acc;
};

// Deterministic for a fixed seed: one splitmix64 stream drives the epoch
// shuffle and per-sample flip decisions, in that order.
template <typename T>
std::vector<EpochStat> train_epochs(Model<T>& model, const Dataset& data,
                                    const TrainOptions& topt,
                                    const std::function<void(const EpochStat&)>& on_epoch = {});

template <typename T>
Metrics evaluate(Model<T>& model, const Dataset& data, int batch);

}  // namespace glim
