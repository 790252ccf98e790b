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

#ifndef LLM4CP_PREDICTOR_HPP
#define LLM4CP_PREDICTOR_HPP

#include "chansim.hpp"
#include "nn/param_store.hpp"
#include "sigproc.hpp"
#include "weight_archive.hpp"

#include <memory>
#include <string>
#include <vector>

namespace llm4cp {

using SamplePtrs = std::vector<const chansim::CsiSample*>;

// Per-antenna history sequences of a set of samples, sample-major then
// antenna: sequence s*Nt + a is antenna a of sample s, as a K x P matrix.
struct SeqBatch {
    int K = 0;
    int P = 0;
    int antennas = 1;
    std::vector<CMat> history;

    int size() const { return static_cast<int>(history.size()); }
};

inline SeqBatch gather_sequences(const SamplePtrs& samples)
{
    SeqBatch b;
    if (samples.empty())
        return b;
    const auto& u0 = samples.front()->uplink;
    b.K = u0.subcarriers;
    b.P = u0.steps;
    b.antennas = u0.antennas;
    b.history.reserve(samples.size() * static_cast<std::size_t>(b.antennas));
    for (const auto* s : samples) {
        const auto& u = s->uplink;
        if (u.subcarriers != b.K || u.steps != b.P || u.antennas != b.antennas)
            throw std::invalid_argument("gather_sequences: inconsistent sample shapes");
        for (int a = 0; a < b.antennas; ++a) {
            CMat h(b.K, b.P);
            for (int t = 0; t < b.P; ++t)
                for (int k = 0; k < b.K; ++k) {
                    const auto z = u(t, k, a);
                    h(k, t) = cf64(z.real(), z.imag());
                }
            b.history.push_back(std::move(h));
        }
    }
    return b;
}

// Realified future of every sequence: 2K x (sequences*L), column s*L + l.
template <class T>
Mat<T> gather_truth(const SamplePtrs& samples)
{
    if (samples.empty())
        return {};
    const auto& d0 = samples.front()->downlink;
    const int K = d0.subcarriers, L = d0.steps, Nt = d0.antennas;
    Mat<T> y(2 * K, static_cast<Eigen::Index>(samples.size()) * Nt * L);
    Eigen::Index seq = 0;
    for (const auto* s : samples)
        for (int a = 0; a < Nt; ++a, ++seq)
            for (int l = 0; l < L; ++l)
                for (int k = 0; k < K; ++k) {
                    const auto z = s->downlink(l, k, a);
                    y(k, seq * L + l) = static_cast<T>(z.real());
                    y(K + k, seq * L + l) = static_cast<T>(z.imag());
                }
    return y;
}

// Inverse of gather_truth for one sample.
template <class T>
chansim::CsiTensor scatter_prediction(const Mat<T>& pred, int sample, int antennas, int L)
{
    const int K = static_cast<int>(pred.rows() / 2);
    chansim::CsiTensor out(L, K, antennas);
    for (int a = 0; a < antennas; ++a) {
        const Eigen::Index seq = static_cast<Eigen::Index>(sample) * antennas + a;
        for (int l = 0; l < L; ++l)
            for (int k = 0; k < K; ++k)
                out(l, k, a) = cf32(static_cast<float>(pred(k, seq * L + l)), static_cast<float>(pred(K + k, seq * L + l)));
    }
    return out;
}

// Per-sequence normalization shared by all learned predictors: the realified
// frequency-domain history of each sequence is standardized by its own
// scalar mean/std, and predictions are mapped back with the same stats.
template <class T>
struct NormalizedHistory {
    Mat<T> x; // 2K x (sequences*P), column s*P + t
    std::vector<sigproc::NormStats> stats;
};

template <class T>
NormalizedHistory<T> normalize_history(const SeqBatch& batch)
{
    NormalizedHistory<T> out;
    out.x.resize(2 * batch.K, static_cast<Eigen::Index>(batch.size()) * batch.P);
    out.stats.reserve(static_cast<std::size_t>(batch.size()));
    for (int s = 0; s < batch.size(); ++s) {
        const Mat<double> re = sigproc::realify<double>(batch.history[static_cast<std::size_t>(s)]);
        const auto st = sigproc::compute_stats(re);
        out.x.middleCols(static_cast<Eigen::Index>(s) * batch.P, batch.P) = sigproc::normalize<double>(re, st).cast<T>();
        out.stats.push_back(st);
    }
    return out;
}

// y: 2K x (sequences*L) in normalized units -> physical units (in place).
template <class T>
void denormalize_output(Mat<T>& y, const std::vector<sigproc::NormStats>& stats, int L)
{
    for (std::size_t s = 0; s < stats.size(); ++s) {
        auto blk = y.middleCols(static_cast<Eigen::Index>(s) * L, L);
        blk = (blk.array() * static_cast<T>(stats[s].std) + static_cast<T>(stats[s].mean)).matrix();
    }
}

// Gradient w.r.t. the normalized output, given the gradient w.r.t. the physical one.
template <class T>
Mat<T> denormalize_output_backward(const Mat<T>& dy, const std::vector<sigproc::NormStats>& stats, int L)
{
    Mat<T> g = dy;
    for (std::size_t s = 0; s < stats.size(); ++s)
        g.middleCols(static_cast<Eigen::Index>(s) * L, L) *= static_cast<T>(stats[s].std);
    return g;
}

// A differentiable per-antenna sequence predictor.
template <class T>
class SequenceModel {
public:
    virtual ~SequenceModel() = default;

    virtual std::string kind() const = 0;
    virtual nn::ParamStore<T>& params() = 0;
    virtual const nn::ParamStore<T>& params() const = 0;
    virtual int horizon() const = 0;

    // Predicted future, physical units, 2K x (sequences*L).
    virtual Mat<T> forward(const SeqBatch& batch) = 0;
    // Accumulates parameter gradients given d(loss)/d(forward output).
    virtual void backward(const Mat<T>& dpred) = 0;

    // Architecture scalars for checkpoints.
    virtual void write_config(WeightArchive& a) const = 0;
};

// Sample-level predictor used by evaluation.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::string id() const = 0;
    virtual bool trainable() const { return false; }
    virtual std::vector<chansim::CsiTensor> predict(const SamplePtrs& samples, int horizon) = 0;
};

template <class T>
class ModelPredictor : public Predictor {
public:
    ModelPredictor(std::string id, std::shared_ptr<SequenceModel<T>> model) : id_(std::move(id)), model_(std::move(model)) {}

    std::string id() const override { return id_; }
    bool trainable() const override { return true; }

    std::vector<chansim::CsiTensor> predict(const SamplePtrs& samples, int horizon) override
    {
        if (horizon != model_->horizon())
            throw std::invalid_argument(id_ + ": model horizon " + std::to_string(model_->horizon()) +
                                        " does not match requested " + std::to_string(horizon));
        std::vector<chansim::CsiTensor> out;
        if (samples.empty())
            return out;
        const auto batch = gather_sequences(samples);
        const Mat<T> y = model_->forward(batch);
        out.reserve(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s)
            out.push_back(scatter_prediction<T>(y, static_cast<int>(s), batch.antennas, horizon));
        return out;
    }

    SequenceModel<T>& model() { return *model_; }

private:
    std::string id_;
    std::shared_ptr<SequenceModel<T>> model_;
};

} // namespace llm4cp

#endif
