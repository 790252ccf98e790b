// SPDX-License-Identifier: Apache-2.0
//
// llm4cp - channel prediction benchmark toolkit
// Copyright (C) 2026 The llm4cp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef LLM4CP_TRAINING_HPP
#define LLM4CP_TRAINING_HPP

#include "nn/layers.hpp"
#include "predictor.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>

namespace llm4cp::training {

// ||pred - truth||^2 / ||truth||^2 over whole tensors.
template <class DerivedA, class DerivedB>
double nmse_loss(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& truth)
{
    const double den = static_cast<double>(truth.squaredNorm());
    if (!(den > 0.0))
        throw std::invalid_argument("nmse_loss: truth has zero energy");
    return static_cast<double>((pred - truth).squaredNorm()) / den;
}

template <class T>
struct BatchLoss {
    double loss = 0.0;           // mean of per-sample NMSEs
    std::vector<double> samples; // per-sample NMSE
    Mat<T> grad;                 // d loss / d pred
};

// pred/truth: 2K x (samples*seqs_per_sample*L). A sample's NMSE pools all of
// its antenna sequences; the batch loss averages samples.
template <class T>
BatchLoss<T> nmse_batch(const Mat<T>& pred, const Mat<T>& truth, int seqs_per_sample, int L, bool with_grad = true)
{
    const auto cols = static_cast<Eigen::Index>(seqs_per_sample) * L;
    const auto n = truth.cols() / cols;
    BatchLoss<T> out;
    out.samples.resize(static_cast<std::size_t>(n));
    if (with_grad)
        out.grad.resize(pred.rows(), pred.cols());
    for (Eigen::Index s = 0; s < n; ++s) {
        const auto p = pred.middleCols(s * cols, cols);
        const auto t = truth.middleCols(s * cols, cols);
        const double den = static_cast<double>(t.template cast<double>().squaredNorm());
        if (!(den > 0.0))
            throw std::invalid_argument("nmse_batch: sample with zero-energy truth");
        const double e = static_cast<double>((p - t).template cast<double>().squaredNorm()) / den;
        out.samples[static_cast<std::size_t>(s)] = e;
        out.loss += e;
        if (with_grad)
            out.grad.middleCols(s * cols, cols) = (p - t) * static_cast<T>(2.0 / (den * static_cast<double>(n)));
    }
    out.loss /= static_cast<double>(n);
    return out;
}

struct NoiseRange {
    double lo_db = 0.0;
    double hi_db = 25.0;
};

struct TrainConfig {
    int batch = 512;
    int epochs = 500;
    double lr0 = 1e-3;
    double decay = 0.1;
    int decay_every = 150;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::optional<NoiseRange> noise; // augmentation, off when empty
    double few_shot = 1.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (batch < 1 || epochs < 1 || decay_every < 1)
            throw ConfigError("train: batch, epochs and decay interval must be positive");
        if (!(lr0 > 0.0) || !(decay > 0.0))
            throw ConfigError("train: learning rate and decay must be positive");
        if (!(few_shot > 0.0 && few_shot <= 1.0))
            throw ConfigError("train: few-shot fraction must be in (0, 1]");
        if (noise && !(std::isfinite(noise->lo_db) && std::isfinite(noise->hi_db) && noise->lo_db <= noise->hi_db))
            throw ConfigError("train: noise range must be a finite interval");
    }
};

inline double lr_at(int epoch, const TrainConfig& cfg)
{
    if (epoch < 0 || epoch >= cfg.epochs)
        throw std::out_of_range("lr_at: epoch outside schedule");
    return cfg.lr0 * std::pow(cfg.decay, epoch / cfg.decay_every);
}

// Uniform subset without replacement of floor(fraction * n) samples; the
// chosen samples keep their original order.
inline chansim::Dataset few_shot_subset(const chansim::Dataset& ds, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ConfigError("few_shot_subset: fraction must be in (0, 1]");
    if (fraction == 1.0)
        return ds;
    const auto n = ds.samples.size();
    const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (m == 0)
        throw ConfigError("few_shot_subset: fraction leaves no samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, 0, 0xF5));
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    chansim::Dataset out;
    out.scenario = ds.scenario;
    out.version = ds.version;
    out.samples.reserve(m);
    for (auto i : idx)
        out.samples.push_back(ds.samples[i]);
    return out;
}

// Per-sample SNR uniform in the range; the future block is left alone.
inline std::vector<chansim::CsiSample> noise_augment(std::vector<chansim::CsiSample> batch,
                                                     const std::optional<NoiseRange>& range, Rng& rng,
                                                     std::vector<double>* drawn = nullptr)
{
    if (!range)
        return batch;
    if (!(range->lo_db <= range->hi_db))
        throw std::invalid_argument("noise_augment: empty SNR interval");
    std::uniform_real_distribution<double> snr(range->lo_db, range->hi_db);
    for (auto& s : batch) {
        const double v = range->lo_db == range->hi_db ? range->lo_db : snr(rng);
        if (drawn)
            drawn->push_back(v);
        s = chansim::add_noise(std::move(s), v, rng);
    }
    return batch;
}

// Everything needed to continue training bit-identically, or to predict.
template <class T>
struct Checkpoint {
    std::string kind;
    int epoch = 0;                  // epochs completed when this state was taken
    double val_loss = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    std::vector<Mat<T>> params;
    std::vector<Mat<T>> adam_m, adam_v;
    std::uint64_t adam_steps = 0;
    // best-so-far tracking, carried so that a resumed run selects the same best
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Mat<T>> best_params;
};

template <class T>
WeightArchive checkpoint_archive(const Checkpoint<T>& ck, const SequenceModel<T>& model)
{
    WeightArchive a;
    model.write_config(a);
    a.put_scalar("meta.epoch", ck.epoch);
    a.put_scalar("meta.val_loss", ck.val_loss);
    a.put_u64("meta.seed", {ck.seed});
    a.put_u64("meta.adam_steps", {ck.adam_steps});
    a.put_scalar("meta.best_epoch", ck.best_epoch);
    a.put_scalar("meta.best_val", ck.best_val);
    const auto& store = model.params();
    const auto put_all = [&](const std::string& prefix, const std::vector<Mat<T>>& v) {
        if (v.empty())
            return;
        for (std::size_t i = 0; i < store.size(); ++i)
            a.put_matrix(prefix + store[i].name, v[i]);
    };
    put_all("param.", ck.params);
    put_all("adam.m.", ck.adam_m);
    put_all("adam.v.", ck.adam_v);
    put_all("best.", ck.best_params);
    return a;
}

template <class T>
Checkpoint<T> checkpoint_from_archive(const WeightArchive& a, const SequenceModel<T>& model)
{
    Checkpoint<T> ck;
    ck.kind = model.kind();
    ck.epoch = static_cast<int>(a.get_scalar("meta.epoch"));
    ck.val_loss = a.get_scalar("meta.val_loss");
    ck.seed = a.get_u64("meta.seed").at(0);
    ck.adam_steps = a.get_u64("meta.adam_steps").at(0);
    ck.best_epoch = static_cast<int>(a.get_scalar("meta.best_epoch"));
    ck.best_val = a.get_scalar("meta.best_val");
    const auto& store = model.params();
    const auto get_all = [&](const std::string& prefix, std::vector<Mat<T>>& v, bool required) {
        if (!required && !a.contains(prefix + store[0].name))
            return;
        v.clear();
        for (std::size_t i = 0; i < store.size(); ++i) {
            Mat<T> m = a.get_matrix<T>(prefix + store[i].name);
            if (m.rows() != store[i].value.rows() || m.cols() != store[i].value.cols())
                throw IoError("checkpoint tensor '" + prefix + store[i].name + "' has the wrong shape");
            v.push_back(std::move(m));
        }
    };
    get_all("param.", ck.params, true);
    get_all("adam.m.", ck.adam_m, false);
    get_all("adam.v.", ck.adam_v, false);
    get_all("best.", ck.best_params, false);
    return ck;
}

// Plain-text sidecar written next to a checkpoint archive.
template <class T>
std::string checkpoint_metadata(const Checkpoint<T>& ck, std::uint64_t config_hash)
{
    std::ostringstream os;
    os.precision(17);
    os << "kind " << ck.kind << '\n'
       << "epoch " << ck.epoch << '\n'
       << "val_loss " << ck.val_loss << '\n'
       << "seed " << ck.seed << '\n'
       << "config_hash " << hex64(config_hash) << '\n';
    return os.str();
}

template <class T>
void save_checkpoint(const Checkpoint<T>& ck, const SequenceModel<T>& model, const std::string& path,
                     std::uint64_t config_hash)
{
    auto a = checkpoint_archive(ck, model);
    a.put_u64("meta.config_hash", {config_hash});
    a.save(path);
    std::ofstream meta(path + ".meta", std::ios::trunc);
    if (!meta)
        throw IoError("cannot write '" + path + ".meta'");
    meta << checkpoint_metadata(ck, config_hash);
}

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

template <class T>
struct TrainResult {
    Checkpoint<T> best;
    Checkpoint<T> last;
    std::vector<EpochLog> log;
    bool diverged = false;
};

// Mean per-sample NMSE of a model over a set of samples, in chunks.
template <class T>
double evaluate_loss(SequenceModel<T>& model, const std::vector<chansim::CsiSample>& samples, int chunk)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(chunk)) {
        SamplePtrs part;
        for (std::size_t j = i; j < std::min(samples.size(), i + static_cast<std::size_t>(chunk)); ++j)
            part.push_back(&samples[j]);
        const auto batch = gather_sequences(part);
        const auto loss = nmse_batch<T>(model.forward(batch), gather_truth<T>(part), batch.antennas, model.horizon(), false);
        for (double e : loss.samples)
            sum += e;
    }
    return sum / static_cast<double>(samples.size());
}

using ProgressFn = std::function<void(const EpochLog&)>;

// Adam on trainable tensors, validation every epoch, best state kept.
// Shuffling and noise draws are derived from (seed, epoch, index) so a
// resumed run reproduces an uninterrupted one exactly.
template <class T>
TrainResult<T> train(SequenceModel<T>& model, const chansim::Dataset& train_set, const chansim::Dataset& val_set,
                     const TrainConfig& cfg, const Checkpoint<T>* resume = nullptr, const ProgressFn& progress = {})
{
    cfg.validate();
    if (train_set.samples.empty() || val_set.samples.empty())
        throw ConfigError("train: datasets must be non-empty");
    const auto data = few_shot_subset(train_set, cfg.few_shot, cfg.seed);
    auto& store = model.params();
    nn::Adam<T> adam(store, {cfg.lr0, cfg.beta1, cfg.beta2, 1e-8});

    TrainResult<T> result;
    auto& best = result.best;
    best.kind = model.kind();
    best.seed = cfg.seed;
    int start = 0;
    if (resume) {
        store.restore(resume->params);
        if (!resume->adam_m.empty()) {
            adam.first_moments() = resume->adam_m;
            adam.second_moments() = resume->adam_v;
        }
        adam.set_steps(resume->adam_steps);
        start = resume->epoch;
        best.epoch = resume->best_epoch;
        best.val_loss = resume->best_val;
        best.params = resume->best_params.empty() ? resume->params : resume->best_params;
    }

    // Validation inputs are fixed across epochs (noisy with per-sample seeds when augmenting).
    std::vector<chansim::CsiSample> val = val_set.samples;
    if (cfg.noise) {
        std::uniform_real_distribution<double> snr(cfg.noise->lo_db, cfg.noise->hi_db);
        for (std::size_t i = 0; i < val.size(); ++i) {
            Rng r(derive_seed(cfg.seed, i, 0xA1));
            const double v = cfg.noise->lo_db == cfg.noise->hi_db ? cfg.noise->lo_db : snr(r);
            val[i] = chansim::add_noise(std::move(val[i]), v, r);
        }
    }

    const std::size_t n = data.samples.size();
    const int L = model.horizon();
    for (int epoch = start; epoch < cfg.epochs; ++epoch) {
        adam.set_lr(lr_at(epoch, cfg));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0x5F));
        std::shuffle(order.begin(), order.end(), shuffle);

        double train_sum = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < n && finite; i += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t end = std::min(n, i + static_cast<std::size_t>(cfg.batch));
            std::vector<chansim::CsiSample> batch;
            batch.reserve(end - i);
            for (std::size_t j = i; j < end; ++j)
                batch.push_back(data.samples[order[j]]);
            if (cfg.noise) {
                Rng nrng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * n + i, 0xA0));
                batch = noise_augment(std::move(batch), cfg.noise, nrng);
            }
            SamplePtrs ptrs;
            for (const auto& s : batch)
                ptrs.push_back(&s);
            const auto seqs = gather_sequences(ptrs);
            store.zero_grad();
            const Mat<T> pred = model.forward(seqs);
            auto loss = nmse_batch<T>(pred, gather_truth<T>(ptrs), seqs.antennas, L);
            if (!std::isfinite(loss.loss)) {
                finite = false;
                break;
            }
            model.backward(loss.grad);
            adam.step();
            for (double e : loss.samples)
                train_sum += e;
        }
        if (!finite) {
            result.diverged = true;
            break;
        }
        EpochLog log{epoch, adam.lr(), train_sum / static_cast<double>(n), evaluate_loss(model, val, cfg.batch)};
        if (!std::isfinite(log.val_loss)) {
            result.diverged = true;
            break;
        }
        result.log.push_back(log);
        if (progress)
            progress(log);
        if (log.val_loss < best.val_loss) {
            best.val_loss = log.val_loss;
            best.epoch = epoch + 1;
            best.params = store.snapshot();
        }
        auto& last = result.last;
        last.kind = model.kind();
        last.seed = cfg.seed;
        last.epoch = epoch + 1;
        last.val_loss = log.val_loss;
        last.params = store.snapshot();
        last.adam_m = adam.first_moments();
        last.adam_v = adam.second_moments();
        last.adam_steps = adam.steps();
        last.best_epoch = best.epoch;
        last.best_val = best.val_loss;
        last.best_params = best.params;
    }
    if (best.params.empty())
        best.params = store.snapshot();
    best.best_epoch = best.epoch;
    best.best_val = best.val_loss;
    store.restore(best.params);
    return result;
}

} // namespace llm4cp::training

#endif
