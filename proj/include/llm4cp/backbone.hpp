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

#ifndef LLM4CP_BACKBONE_HPP
#define LLM4CP_BACKBONE_HPP

#include "nn/layers.hpp"
#include "weight_archive.hpp"

#include <string>
#include <vector>

// Decoder-only transformer stack in the GPT-2 layout (pre-norm residual
// blocks, learnable absolute position table, tanh-GELU MLP). The token
// embedding and the final layer norm are not part of the stack: inputs are
// already embedded and the output head follows directly.
//
// Canonical tensor names (all matrices stored out x in):
//
//   wpe.weight               max_positions x F
//   h.<i>.ln_1.weight|bias   F
//   h.<i>.attn.{q,k,v,o}.weight  F x F,  .bias F
//   h.<i>.ln_2.weight|bias   F
//   h.<i>.mlp.fc.weight      ffn x F,  .bias ffn
//   h.<i>.mlp.proj.weight    F x ffn,  .bias F
//
// tools/gpt2_to_cpwt.py maps a Hugging Face GPT-2 state dict onto these
// names (splitting c_attn and transposing the Conv1D weights).

namespace llm4cp::backbone {

struct BackboneConfig {
    int layers = 6;
    int features = 768;
    int heads = 12;
    int ffn = 3072;
    int max_positions = 1024;
    double dropout = 0.0;
    bool causal = true;

    void validate() const
    {
        if (layers < 0)
            throw ConfigError("backbone: layer count must be >= 0");
        if (features < 1 || heads < 1 || features % heads != 0)
            throw ConfigError("backbone: features must be a positive multiple of heads");
        if (ffn < 1 || max_positions < 1)
            throw ConfigError("backbone: ffn width and max positions must be positive");
        if (dropout != 0.0)
            throw ConfigError("backbone: only dropout 0 is supported");
    }
};

inline bool is_frozen_name(const std::string& name)
{
    return name.find(".attn.") != std::string::npos || name.find(".mlp.") != std::string::npos;
}

template <class T>
class Block {
public:
    Block() = default;
    Block(nn::ParamStore<T>& s, const std::string& p, const BackboneConfig& c)
        : ln1_(s, p + ".ln_1", c.features), attn_(s, p + ".attn", c.features, c.heads),
          ln2_(s, p + ".ln_2", c.features), fc_(s, p + ".mlp.fc", c.features, c.ffn),
          proj_(s, p + ".mlp.proj", c.ffn, c.features)
    {
    }

    Mat<T> forward(const Mat<T>& x, int batch, bool causal)
    {
        Mat<T> x1 = x + attn_.forward(ln1_.forward(x), batch, causal);
        pre_gelu_ = fc_.forward(ln2_.forward(x1));
        return x1 + proj_.forward(nn::gelu(pre_gelu_));
    }

    Mat<T> backward(const Mat<T>& dy)
    {
        Mat<T> dx1 = dy + ln2_.backward(fc_.backward(nn::gelu_backward(pre_gelu_, proj_.backward(dy))));
        return dx1 + ln1_.backward(attn_.backward(dx1));
    }

    void init(double stddev, Rng& rng)
    {
        attn_.init_normal_all(stddev, rng);
        for (auto* l : {&fc_, &proj_}) {
            nn::init_normal(l->weight(), stddev, rng);
            l->bias().value.setZero();
        }
    }

private:
    nn::LayerNorm<T> ln1_;
    nn::MultiHeadAttention<T> attn_;
    nn::LayerNorm<T> ln2_;
    nn::Linear<T> fc_, proj_;
    Mat<T> pre_gelu_;
};

template <class T>
class Backbone {
public:
    Backbone() = default;
    Backbone(nn::ParamStore<T>& store, const BackboneConfig& cfg, const std::string& prefix = "")
        : cfg_(cfg), prefix_(prefix)
    {
        cfg.validate();
        wpe_ = &store.add(prefix + "wpe.weight", cfg.max_positions, cfg.features);
        for (int i = 0; i < cfg.layers; ++i)
            blocks_.emplace_back(store, prefix + "h." + std::to_string(i), cfg);
    }

    const BackboneConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

    // N(0, 0.02) for projection weights, zero biases, unit layer-norm scales.
    void init_random(Rng& rng)
    {
        nn::init_normal(*wpe_, 0.01, rng);
        for (auto& b : blocks_)
            b.init(0.02, rng);
    }

    // x: F x (batch*S), sequence-major per batch entry.
    Mat<T> forward(const Mat<T>& x, int batch)
    {
        const auto S = static_cast<int>(x.cols() / batch);
        if (x.rows() != cfg_.features || static_cast<Eigen::Index>(S) * batch != x.cols())
            throw std::invalid_argument("backbone: input shape mismatch");
        if (S > cfg_.max_positions)
            throw std::invalid_argument("backbone: sequence length " + std::to_string(S) + " exceeds " +
                                        std::to_string(cfg_.max_positions) + " positions");
        S_ = S;
        B_ = batch;
        Mat<T> h = x;
        for (int b = 0; b < batch; ++b)
            h.middleCols(static_cast<Eigen::Index>(b) * S, S) += wpe_->value.topRows(S).transpose();
        for (auto& blk : blocks_)
            h = blk.forward(h, batch, cfg_.causal);
        return h;
    }

    Mat<T> backward(const Mat<T>& dy)
    {
        Mat<T> g = dy;
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
            g = it->backward(g);
        if (wpe_->wants_grad())
            for (int b = 0; b < B_; ++b)
                wpe_->grad.topRows(S_) += g.middleCols(static_cast<Eigen::Index>(b) * S_, S_).transpose();
        return g;
    }

    nn::Tensor<T>& position_table() { return *wpe_; }

private:
    BackboneConfig cfg_;
    std::string prefix_;
    nn::Tensor<T>* wpe_ = nullptr;
    std::vector<Block<T>> blocks_;
    int S_ = 0, B_ = 0;
};

// Attention and MLP tensors frozen; layer norms and the position table trainable.
template <class T>
nn::FreezeMask default_freeze_mask(const nn::ParamStore<T>& store, const std::string& prefix)
{
    nn::FreezeMask m;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& name = store[i].name;
        const bool in_backbone = name.rfind(prefix, 0) == 0 &&
                                 (name.compare(prefix.size(), 4, "wpe.") == 0 || name.compare(prefix.size(), 2, "h.") == 0);
        m[name] = !(in_backbone && is_frozen_name(name.substr(prefix.size())));
    }
    return m;
}

// Closed-form trainable backbone count: two layer norms per block plus the position table.
inline std::size_t trainable_backbone_count(const BackboneConfig& c)
{
    return static_cast<std::size_t>(2 * 2 * c.features * c.layers) +
           static_cast<std::size_t>(c.max_positions) * static_cast<std::size_t>(c.features);
}

// Copies the stack's tensors from a canonically named archive. Tensors the
// stack does not use (token embedding, final norm, deeper layers) are
// ignored; every missing or mis-shaped required tensor is reported.
template <class T>
void load_pretrained(const WeightArchive& archive, nn::ParamStore<T>& store, const Backbone<T>& bb)
{
    const auto& prefix = bb.prefix();
    std::string missing, mismatched;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& t = store[i];
        if (t.name.rfind(prefix, 0) != 0)
            continue;
        const auto canonical = t.name.substr(prefix.size());
        if (canonical.rfind("wpe.", 0) != 0 && canonical.rfind("h.", 0) != 0)
            continue;
        if (!archive.contains(canonical)) {
            missing += (missing.empty() ? "" : ", ") + canonical;
            continue;
        }
        Mat<T> m = archive.get_matrix<T>(canonical);
        if (m.rows() != t.value.rows() || m.cols() != t.value.cols()) {
            mismatched += (mismatched.empty() ? "" : ", ") + canonical + " (archive " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " + std::to_string(t.value.rows()) + "x" +
                          std::to_string(t.value.cols()) + ")";
            continue;
        }
        t.value = std::move(m);
    }
    if (!missing.empty() || !mismatched.empty()) {
        std::string msg = "pretrained archive rejected";
        if (!missing.empty())
            msg += "; missing: " + missing;
        if (!mismatched.empty())
            msg += "; shape mismatch: " + mismatched;
        throw IoError(msg);
    }
}

} // namespace llm4cp::backbone

#endif
