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

#ifndef LLM4CP_BASELINES_TRANSFORMER_HPP
#define LLM4CP_BASELINES_TRANSFORMER_HPP

#include "../backbone.hpp"
#include "../model.hpp"

// Parallel encoder-decoder predictor: a non-causal encoder over the P
// history tokens, then L learned query vectors cross-attend to the encoded
// history and are read out together, so every future step comes from one
// pass without feeding predictions back in.

namespace llm4cp::baselines {

struct TransformerConfig {
    int d_model = 192;
    int heads = 8;
    int encoder_layers = 3;
    int ffn = 768;
    int K = 48;
    int P = 16;
    int L = 4;
    bool positional = true;

    void validate() const
    {
        if (d_model < 2 || d_model % 2 != 0 || heads < 1 || d_model % heads != 0)
            throw ConfigError("transformer: d_model must be even and divisible by heads");
        if (encoder_layers < 1 || ffn < 1 || K < 1 || P < 1 || L < 1)
            throw ConfigError("transformer: sizes must be positive");
    }
};

template <class T>
class TransformerModel : public SequenceModel<T> {
public:
    explicit TransformerModel(const TransformerConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        backbone::BackboneConfig bc;
        bc.layers = 1;
        bc.features = cfg.d_model;
        bc.heads = cfg.heads;
        bc.ffn = cfg.ffn;
        bc.causal = false;
        embed_ = nn::Linear<T>(store_, "embed", 2 * cfg.K, cfg.d_model);
        for (int i = 0; i < cfg.encoder_layers; ++i)
            encoder_.emplace_back(store_, "enc." + std::to_string(i), bc);
        enc_norm_ = nn::LayerNorm<T>(store_, "enc.ln_f", cfg.d_model);
        queries_ = &store_.add("dec.queries", cfg.d_model, cfg.L);
        dec_ln1_ = nn::LayerNorm<T>(store_, "dec.ln_1", cfg.d_model);
        cross_ = nn::MultiHeadAttention<T>(store_, "dec.cross", cfg.d_model, cfg.heads);
        dec_ln2_ = nn::LayerNorm<T>(store_, "dec.ln_2", cfg.d_model);
        fc_ = nn::Linear<T>(store_, "dec.mlp.fc", cfg.d_model, cfg.ffn);
        proj_ = nn::Linear<T>(store_, "dec.mlp.proj", cfg.ffn, cfg.d_model);
        out_ = nn::Linear<T>(store_, "out", cfg.d_model, 2 * cfg.K);
        pe_ = positional_encoding<T>(cfg.d_model, cfg.P);
    }

    TransformerModel(const TransformerModel&) = delete;
    TransformerModel& operator=(const TransformerModel&) = delete;

    void init(std::uint64_t seed)
    {
        Rng rng(derive_seed(seed, 0, 0x55));
        embed_.init_default(rng);
        for (auto& b : encoder_)
            b.init(0.02, rng);
        nn::init_normal(*queries_, 0.02, rng);
        cross_.init_normal_all(0.02, rng);
        fc_.init_default(rng);
        proj_.init_default(rng);
        out_.init_default(rng);
    }

    std::string kind() const override { return "transformer"; }
    nn::ParamStore<T>& params() override { return store_; }
    const nn::ParamStore<T>& params() const override { return store_; }
    int horizon() const override { return cfg_.L; }
    TransformerConfig& config() { return cfg_; }

    // Normalized history tokens (2K x B*P) -> normalized prediction (2K x B*L).
    Mat<T> forward_normalized(const Mat<T>& x, int B)
    {
        const int P = cfg_.P, L = cfg_.L;
        B_ = B;
        Mat<T> h = embed_.forward(x);
        if (cfg_.positional)
            for (int s = 0; s < B; ++s)
                h.middleCols(static_cast<Eigen::Index>(s) * P, P) += pe_;
        for (auto& blk : encoder_)
            h = blk.forward(h, B, false);
        const Mat<T> mem = enc_norm_.forward(h);
        Mat<T> q(cfg_.d_model, static_cast<Eigen::Index>(B) * L);
        for (int s = 0; s < B; ++s)
            q.middleCols(static_cast<Eigen::Index>(s) * L, L) = queries_->value;
        const Mat<T> c = q + cross_.forward(dec_ln1_.forward(q), mem, B, false);
        pre_gelu_ = fc_.forward(dec_ln2_.forward(c));
        const Mat<T> d = c + proj_.forward(nn::gelu(pre_gelu_));
        return out_.forward(d);
    }

    void backward_normalized(const Mat<T>& dy)
    {
        const int L = cfg_.L;
        const Mat<T> dd = out_.backward(dy);
        const Mat<T> dc = dd + dec_ln2_.backward(fc_.backward(nn::gelu_backward(pre_gelu_, proj_.backward(dd))));
        auto [dq_ln, dmem] = cross_.backward_pair(dc);
        const Mat<T> dq = dc + dec_ln1_.backward(dq_ln);
        if (queries_->wants_grad())
            for (int s = 0; s < B_; ++s)
                queries_->grad += dq.middleCols(static_cast<Eigen::Index>(s) * L, L);
        Mat<T> g = enc_norm_.backward(dmem);
        for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it)
            g = it->backward(g);
        embed_.backward(g);
    }

    Mat<T> forward(const SeqBatch& batch) override
    {
        if (batch.K != cfg_.K || batch.P != cfg_.P)
            throw std::invalid_argument("transformer: batch shape does not match model");
        auto norm = normalize_history<T>(batch);
        stats_ = std::move(norm.stats);
        Mat<T> y = forward_normalized(norm.x, batch.size());
        denormalize_output(y, stats_, cfg_.L);
        return y;
    }

    void backward(const Mat<T>& dpred) override { backward_normalized(denormalize_output_backward(dpred, stats_, cfg_.L)); }

    void write_config(WeightArchive& a) const override
    {
        a.put_scalar("config.d_model", cfg_.d_model);
        a.put_scalar("config.heads", cfg_.heads);
        a.put_scalar("config.encoder_layers", cfg_.encoder_layers);
        a.put_scalar("config.ffn", cfg_.ffn);
        a.put_scalar("config.K", cfg_.K);
        a.put_scalar("config.P", cfg_.P);
        a.put_scalar("config.L", cfg_.L);
        a.put_scalar("config.positional", cfg_.positional ? 1.0 : 0.0);
    }

private:
    TransformerConfig cfg_;
    nn::ParamStore<T> store_;
    nn::Linear<T> embed_;
    std::vector<backbone::Block<T>> encoder_;
    nn::LayerNorm<T> enc_norm_;
    nn::Tensor<T>* queries_ = nullptr;
    nn::LayerNorm<T> dec_ln1_;
    nn::MultiHeadAttention<T> cross_;
    nn::LayerNorm<T> dec_ln2_;
    nn::Linear<T> fc_, proj_, out_;
    Mat<T> pe_, pre_gelu_;
    std::vector<sigproc::NormStats> stats_;
    int B_ = 0;
};

} // namespace llm4cp::baselines

#endif
