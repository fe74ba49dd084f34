#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prng.hpp"

namespace glim {

double lr_at_epoch(const OptimHyper& h, int epoch) {
    if (epoch < 0 || h.step_epochs < 1)
        fail(ErrCode::invalid_argument, "lr_at_epoch: bad epoch/step");
    return h.lr0 * std::pow(h.decay_gamma, epoch / h.step_epochs);
}

template <typename T>
void rmsprop_step(ParamStore<T>& store, T lr, const OptimHyper& h) {
    for (auto& e : store.entries) {
        if (!e.trainable) continue;
        if (!(e.grad.dims() == e.value.dims()))
            fail(ErrCode::invalid_argument, "rmsprop_step: no gradient for " + e.name);
        if (!(e.sq_avg.dims() == e.value.dims())) {
            e.sq_avg = Tensor<T>(e.value.dims());
            e.moment = Tensor<T>(e.value.dims());
        }
        T* p = e.value.data();
        const T* gr = e.grad.data();
        T* v = e.sq_avg.data();
        T* b = e.moment.data();
        const T wd = static_cast<T>(h.weight_decay), a = static_cast<T>(h.alpha);
        const T mu = static_cast<T>(h.momentum), eps = static_cast<T>(h.eps);
        for (int64_t i = 0; i < e.value.numel(); ++i) {
            const T g = gr[i] + wd * p[i];
            v[i] = a * v[i] + (T(1) - a) * g * g;
            b[i] = mu * b[i] + g / (std::sqrt(v[i]) + eps);
            p[i] -= lr * b[i];
        }
    }
}

Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                        int num_classes) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        fail(ErrCode::invalid_argument, "compute_metrics: label vectors empty or mismatched");
    Metrics m;
    m.confusion.assign(static_cast<size_t>(num_classes),
                       std::vector<long long>(static_cast<size_t>(num_classes), 0));
    for (size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= num_classes || y_pred[i] < 0 || y_pred[i] >= num_classes)
            fail(ErrCode::invalid_argument,
                 "compute_metrics: label out of range at row " + std::to_string(i));
        m.confusion[static_cast<size_t>(y_true[i])][static_cast<size_t>(y_pred[i])]++;
    }
    m.precision.assign(static_cast<size_t>(num_classes), 0);
    m.recall.assign(static_cast<size_t>(num_classes), 0);
    m.f1.assign(static_cast<size_t>(num_classes), 0);
    m.support.assign(static_cast<size_t>(num_classes), 0);
    long long correct = 0;
    double wf1 = 0;
    for (int k = 0; k < num_classes; ++k) {
        long long col = 0, row = 0;
        for (int j = 0; j < num_classes; ++j) {
            col += m.confusion[static_cast<size_t>(j)][static_cast<size_t>(k)];
            row += m.confusion[static_cast<size_t>(k)][static_cast<size_t>(j)];
        }
        const long long tp = m.confusion[static_cast<size_t>(k)][static_cast<size_t>(k)];
        correct += tp;
        m.support[static_cast<size_t>(k)] = row;
        const double p = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        const double r = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        m.precision[static_cast<size_t>(k)] = p;
        m.recall[static_cast<size_t>(k)] = r;
        m.f1[static_cast<size_t>(k)] = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
        wf1 += static_cast<double>(row) * m.f1[static_cast<size_t>(k)];
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
    m.weighted_f1 = wf1 / static_cast<double>(y_true.size());
    return m;
}

TensorF hflip_image(const TensorF& img) {
    const Dims d = img.dims();
    TensorF out(d);
    for (int64_t n = 0; n < d.n; ++n)
        for (int64_t c = 0; c < d.c; ++c)
            for (int64_t y = 0; y < d.h; ++y)
                for (int64_t x = 0; x < d.w; ++x)
                    out.at(n, c, y, x) = img.at(n, c, y, d.w - 1 - x);
    return out;
}

namespace {

template <typename T>
Tensor<T> assemble_batch(const Dataset& data, const std::vector<int>& order, size_t lo, size_t hi,
                         bool hflip, SplitMix64& rng, std::vector<int>& labels) {
    const Dims d0 = data.images.front().dims();
    Tensor<T> batch({static_cast<int64_t>(hi - lo), d0.c, d0.h, d0.w});
    labels.clear();
    const int64_t sample = d0.numel();
    for (size_t i = lo; i < hi; ++i) {
        const auto idx = static_cast<size_t>(order[i]);
        const TensorF* img = &data.images[idx];
        TensorF flipped;
        if (hflip && rng.uniform() < 0.5) {
            flipped = hflip_image(*img);
            img = &flipped;
        }
        T* dst = batch.data() + static_cast<int64_t>(i - lo) * sample;
        for (int64_t j = 0; j < sample; ++j) dst[j] = static_cast<T>(img->data()[j]);
        labels.push_back(data.labels[idx]);
    }
    return batch;
}

}  // namespace

template <typename T>
std::vector<EpochStat> train_epochs(Model<T>& model, const Dataset& data, const TrainOptions& topt,
                                    const std::function<void(const EpochStat&)>& on_epoch) {
    if (topt.epochs < 0 || topt.batch < 2)
        fail(ErrCode::invalid_argument, "train: epochs must be >= 0 and batch >= 2");
    const size_t n = data.images.size();
    if (n == 0) fail(ErrCode::invalid_argument, "train: dataset is empty");
    if (n % static_cast<size_t>(topt.batch) == 1)
        fail(ErrCode::invalid_argument,
             "train: batch size leaves a single-sample batch, which batch norm rejects");
    SplitMix64 rng(topt.seed);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochStat> stats;
    for (int epoch = 0; epoch < topt.epochs; ++epoch) {
        const double lr = lr_at_epoch(topt.opt, epoch);
        rng.shuffle(order);
        double loss_sum = 0;
        long long correct = 0;
        std::vector<int> labels;
        for (size_t lo = 0; lo < n; lo += static_cast<size_t>(topt.batch)) {
            const size_t hi = std::min(n, lo + static_cast<size_t>(topt.batch));
            Tensor<T> batch = assemble_batch<T>(data, order, lo, hi, topt.hflip, rng, labels);
            ModelCache<T> cache;
            Tensor<T> logits = model_forward(model, batch, Mode::train, &cache);
            Tensor<T> probs;
            const T loss = softmax_cross_entropy(logits, labels, &probs);
            Tensor<T> g = softmax_cross_entropy_bwd(probs, labels);
            model_backward(model, cache, g);
            rmsprop_step(model.params, static_cast<T>(lr), topt.opt);
            loss_sum += static_cast<double>(loss) * static_cast<double>(hi - lo);
            for (size_t i = 0; i < labels.size(); ++i) {
                int arg = 0;
                const T* row = probs.data() + static_cast<int64_t>(i) * probs.dims().c;
                for (int64_t k = 1; k < probs.dims().c; ++k)
                    if (row[k] > row[arg]) arg = static_cast<int>(k);
                if (arg == labels[i]) ++correct;
            }
        }
        EpochStat st{epoch + 1, lr, loss_sum / static_cast<double>(n),
                     static_cast<double>(correct) / static_cast<double>(n)};
        stats.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    return stats;
}

template <typename T>
Metrics evaluate(Model<T>& model, const Dataset& data, int batch) {
    if (batch < 1) fail(ErrCode::invalid_argument, "evaluate: batch must be >= 1");
    const size_t n = data.images.size();
    std::vector<int> y_true, y_pred;
    double loss_sum = 0;
    SplitMix64 rng(0);  // unused: no augmentation at eval
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> labels;
    for (size_t lo = 0; lo < n; lo += static_cast<size_t>(batch)) {
        const size_t hi = std::min(n, lo + static_cast<size_t>(batch));
        Tensor<T> b = assemble_batch<T>(data, order, lo, hi, false, rng, labels);
        Tensor<T> logits = model_forward(model, b, Mode::infer);
        Tensor<T> probs;
        loss_sum += static_cast<double>(softmax_cross_entropy(logits, labels, &probs)) *
                    static_cast<double>(hi - lo);
        for (size_t i = 0; i < labels.size(); ++i) {
            int arg = 0;
            const T* row = probs.data() + static_cast<int64_t>(i) * probs.dims().c;
            for (int64_t k = 1; k < probs.dims().c; ++k)
                if (row[k] > row[arg]) arg = static_cast<int>(k);
            y_true.push_back(labels[i]);
            y_pred.push_back(arg);
        }
    }
    Metrics m = compute_metrics(y_true, y_pred, static_cast<int>(model.cfg.num_classes));
    m.mean_loss = loss_sum / static_cast<double>(n);
    return m;
}

template void rmsprop_step(ParamStore<float>&, float, const OptimHyper&);
template void rmsprop_step(ParamStore<double>&, double, const OptimHyper&);
template std::vector<EpochStat> train_epochs(Model<float>&, const Dataset&, const TrainOptions&,
                                             const std::function<void(const EpochStat&)>&);
template std::vector<EpochStat> train_epochs(Model<double>&, const Dataset&, const TrainOptions&,
                                             const std::function<void(const EpochStat&)>&);
template Metrics evaluate(Model<float>&, const Dataset&, int);
template Metrics evaluate(Model<double>&, const Dataset&, int);

}  // namespace glim
