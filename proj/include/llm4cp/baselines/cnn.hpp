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

#ifndef LLM4CP_BASELINES_CNN_HPP
#define LLM4CP_BASELINES_CNN_HPP

#include "../nn/layers.hpp"
#include "../predictor.hpp"

// The history as a two-channel (real, imag) K x P image: a stack of 3x3
// convolutions with ReLU in between, then a linear map along time P -> L.

namespace llm4cp::baselines {

struct CnnConfig {
    int layers = 10;
    int channels = 208;
    int K = 48;
    int P = 16;
    int L = 4;

    void validate() const
    {
        if (layers < 2 || channels < 1 || K < 1 || P < 1 || L < 1)
            throw ConfigError("cnn: needs >= 2 layers and positive sizes");
    }
};

template <class T>
class CnnModel : public SequenceModel<T> {
public:
    explicit CnnModel(const CnnConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        for (int i = 0; i < cfg.layers; ++i) {
            const int in = i == 0 ? 2 : cfg.channels;
            const int out = i == cfg.layers - 1 ? 2 : cfg.channels;
            convs_.emplace_back(store_, "conv." + std::to_string(i), in, out);
        }
        time_ = nn::Linear<T>(store_, "time", cfg.P, cfg.L);
    }

    CnnModel(const CnnModel&) = delete;
    CnnModel& operator=(const CnnModel&) = delete;

    void init(std::uint64_t seed)
    {
        Rng rng(derive_seed(seed, 0, 0x44));
        for (auto& c : convs_)
            c.init_default(rng);
        time_.init_default(rng);
    }

    std::string kind() const override { return "cnn"; }
    nn::ParamStore<T>& params() override { return store_; }
    const nn::ParamStore<T>& params() const override { return store_; }
    int horizon() const override { return cfg_.L; }

    // x: 2 x (B*K*P) image batch -> output image of the last conv (2 x B*K*P).
    Mat<T> conv_stack(const Mat<T>& x)
    {
        pre_.clear();
        Mat<T> h = x;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            h = convs_[i].forward(h, cfg_.K, cfg_.P);
            if (i + 1 < convs_.size()) {
                pre_.push_back(h);
                h = nn::relu(h);
            }
        }
        return h;
    }

    Mat<T> forward(const SeqBatch& batch) override
    {
        if (batch.K != cfg_.K || batch.P != cfg_.P)
            throw std::invalid_argument("cnn: batch shape does not match model");
        auto norm = normalize_history<T>(batch);
        stats_ = std::move(norm.stats);
        const int B = batch.size(), K = cfg_.K, P = cfg_.P, L = cfg_.L;
        const auto KP = static_cast<Eigen::Index>(K) * P;
        Mat<T> img(2, B * KP);
        for (int s = 0; s < B; ++s)
            for (int c = 0; c < 2; ++c)
                for (int k = 0; k < K; ++k)
                    for (int t = 0; t < P; ++t)
                        img(c, s * KP + k * P + t) = norm.x(c * K + k, static_cast<Eigen::Index>(s) * P + t);
        const Mat<T> h = conv_stack(img);
        // rows of the time map input are time steps; one column per (sample, channel, subcarrier)
        Mat<T> m(P, static_cast<Eigen::Index>(B) * 2 * K);
        for (int s = 0; s < B; ++s)
            for (int c = 0; c < 2; ++c)
                for (int k = 0; k < K; ++k)
                    m.col((static_cast<Eigen::Index>(s) * 2 + c) * K + k) = h.row(c).segment(s * KP + k * P, P).transpose();
        const Mat<T> z = time_.forward(m);
        Mat<T> y(2 * K, static_cast<Eigen::Index>(B) * L);
        for (int s = 0; s < B; ++s)
            for (int c = 0; c < 2; ++c)
                for (int k = 0; k < K; ++k)
                    for (int l = 0; l < L; ++l)
                        y(c * K + k, static_cast<Eigen::Index>(s) * L + l) = z(l, (static_cast<Eigen::Index>(s) * 2 + c) * K + k);
        denormalize_output(y, stats_, L);
        return y;
    }

    void backward(const Mat<T>& dpred) override
    {
        const int K = cfg_.K, P = cfg_.P, L = cfg_.L;
        const auto KP = static_cast<Eigen::Index>(K) * P;
        const Mat<T> dy = denormalize_output_backward(dpred, stats_, L);
        const auto B = dy.cols() / L;
        Mat<T> dz(L, B * 2 * K);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int c = 0; c < 2; ++c)
                for (int k = 0; k < K; ++k)
                    for (int l = 0; l < L; ++l)
                        dz(l, (s * 2 + c) * K + k) = dy(c * K + k, s * L + l);
        const Mat<T> dm = time_.backward(dz);
        Mat<T> dh(2, B * KP);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int c = 0; c < 2; ++c)
                for (int k = 0; k < K; ++k)
                    dh.row(c).segment(s * KP + k * P, P) = dm.col((s * 2 + c) * K + k).transpose();
        for (std::size_t i = convs_.size(); i-- > 0;) {
            if (i + 1 < convs_.size())
                dh = nn::relu_backward(pre_[i], dh);
            dh = convs_[i].backward(dh);
        }
    }

    void write_config(WeightArchive& a) const override
    {
        a.put_scalar("config.layers", cfg_.layers);
        a.put_scalar("config.channels", cfg_.channels);
        a.put_scalar("config.K", cfg_.K);
        a.put_scalar("config.P", cfg_.P);
        a.put_scalar("config.L", cfg_.L);
    }

private:
    CnnConfig cfg_;
    nn::ParamStore<T> store_;
    std::vector<nn::Conv2d<T>> convs_;
    nn::Linear<T> time_;
    std::vector<Mat<T>> pre_;
    std::vector<sigproc::NormStats> stats_;
};

} // namespace llm4cp::baselines

#endif
