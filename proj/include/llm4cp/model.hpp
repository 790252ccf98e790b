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

#ifndef LLM4CP_MODEL_HPP
#define LLM4CP_MODEL_HPP

#include "backbone.hpp"
#include "predictor.hpp"

// The prediction network around the backbone, for one antenna sequence:
//
//   H_f (K x P) ─┬─ realify ─ normalize ─ patch ─ CSI attention x N1 ─┐
//                └─ F^H ─ realify ─ normalize ─ patch ─ CSI attention x N2 ─┴─ + ─ tokens ─ FC ─ +PE
//   ─ backbone ─ FC(F->F) ─ GELU ─ FC(F->2K) ─ time map (P'->L) ─ denormalize ─ complexify
//
// Batches of sequences are carried as (patch x sequences*2K*N) planes for
// the attention stage and (features x sequences*P') token matrices after it.

namespace llm4cp {

struct ModelConfig {
    int K = 48;
    int P = 16;
    int L = 4;
    int N = 4;    // patch size
    int F = 768;  // backbone width
    int layers = 6;
    int heads = 12;
    int n1 = 4;   // frequency-branch attention depth
    int n2 = 4;   // delay-branch attention depth
    int reduction = 2;
    int max_positions = 1024;
    bool causal = true;

    int patches() const { return sigproc::num_patches(P, N); }

    void validate() const
    {
        if (K < 1 || P < 1 || L < 1 || N < 1)
            throw ConfigError("model: K, P, L and N must be positive");
        if (F < 2 || F % 2 != 0)
            throw ConfigError("model: F must be positive and even");
        if (reduction < 1 || patches() / reduction < 1)
            throw ConfigError("model: reduction ratio must satisfy 1 <= r <= P'");
        if (n1 < 0 || n2 < 0)
            throw ConfigError("model: attention depths must be >= 0");
        backbone_config().validate();
    }

    backbone::BackboneConfig backbone_config() const
    {
        backbone::BackboneConfig b;
        b.layers = layers;
        b.features = F;
        b.heads = heads;
        b.ffn = 4 * F;
        b.max_positions = max_positions;
        b.causal = causal;
        return b;
    }
};

// Sinusoidal table: PE[2i][j] = sin(j / 10000^(2i/F)), PE[2i+1][j] = cos(same).
template <class T = double>
Mat<T> positional_encoding(int F, int length)
{
    if (F < 2 || F % 2 != 0)
        throw std::invalid_argument("positional_encoding: F must be even");
    Mat<T> pe(F, length);
    for (int i = 0; i < F / 2; ++i) {
        const double denom = std::pow(10000.0, 2.0 * i / F);
        for (int j = 0; j < length; ++j) {
            pe(2 * i, j) = static_cast<T>(std::sin(j / denom));
            pe(2 * i + 1, j) = static_cast<T>(std::cos(j / denom));
        }
    }
    return pe;
}

template <class T>
struct Preprocessed {
    sigproc::PatchedTensor<T> freq;
    sigproc::PatchedTensor<T> delay;
    sigproc::NormStats freq_stats;
    sigproc::NormStats delay_stats;
};

// One antenna's K x P history -> normalized, patched frequency and delay views.
template <class T>
Preprocessed<T> preprocess(const CMat& hf, int patch_size)
{
    if (!hf.allFinite())
        throw std::invalid_argument("preprocess: non-finite CSI input");
    Preprocessed<T> out;
    const Mat<double> xf = sigproc::realify<double>(hf);
    const Mat<double> xd = sigproc::realify<double>(sigproc::idft_delay(hf));
    out.freq_stats = sigproc::compute_stats(xf);
    out.delay_stats = sigproc::compute_stats(xd);
    out.freq = sigproc::patch<T>(sigproc::normalize<double>(xf, out.freq_stats).template cast<T>().eval(), patch_size);
    out.delay = sigproc::patch<T>(sigproc::normalize<double>(xd, out.delay_stats).template cast<T>().eval(), patch_size);
    return out;
}

// Residual conv + squeeze-and-excitation block over (channels = patches,
// plane = 2K x N).
template <class T>
class CsiAttention {
public:
    CsiAttention() = default;
    CsiAttention(nn::ParamStore<T>& s, const std::string& p, int channels, int reduction)
        : channels_(channels), conv1_(s, p + ".conv1", channels, channels), conv2_(s, p + ".conv2", channels, channels),
          fc1_(s, p + ".fc1", channels, channels / reduction), fc2_(s, p + ".fc2", channels / reduction, channels)
    {
    }

    void init_default(Rng& rng)
    {
        conv1_.init_default(rng);
        conv2_.init_default(rng);
        fc1_.init_default(rng);
        fc2_.init_default(rng);
    }

    // x: channels x (batch*H*W).
    Mat<T> forward(const Mat<T>& x, int H, int W)
    {
        if (x.rows() != channels_)
            throw std::invalid_argument("CsiAttention: channel mismatch");
        H_ = H;
        W_ = W;
        const auto HW = static_cast<Eigen::Index>(H) * W;
        const auto B = x.cols() / HW;
        u_ = conv1_.forward(x, H, W);
        f_ = conv2_.forward(nn::relu(u_), H, W);
        Mat<T> pooled(channels_, B);
        for (Eigen::Index b = 0; b < B; ++b)
            pooled.col(b) = f_.middleCols(b * HW, HW).rowwise().sum() / static_cast<T>(HW);
        z_ = fc1_.forward(pooled);
        w_ = nn::sigmoid(fc2_.forward(nn::relu(z_)));
        Mat<T> y = x;
        for (Eigen::Index b = 0; b < B; ++b)
            y.middleCols(b * HW, HW) += w_.col(b).asDiagonal() * f_.middleCols(b * HW, HW);
        return y;
    }

    Mat<T> backward(const Mat<T>& dy)
    {
        const auto HW = static_cast<Eigen::Index>(H_) * W_;
        const auto B = dy.cols() / HW;
        Mat<T> df(dy.rows(), dy.cols());
        Mat<T> dw(channels_, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            const auto dyb = dy.middleCols(b * HW, HW);
            df.middleCols(b * HW, HW) = w_.col(b).asDiagonal() * dyb;
            dw.col(b) = dyb.cwiseProduct(f_.middleCols(b * HW, HW)).rowwise().sum();
        }
        const Mat<T> dlogit = (dw.array() * w_.array() * (T(1) - w_.array())).matrix();
        const Mat<T> dpooled = fc1_.backward(nn::relu_backward(z_, fc2_.backward(dlogit)));
        for (Eigen::Index b = 0; b < B; ++b)
            df.middleCols(b * HW, HW).colwise() += dpooled.col(b) / static_cast<T>(HW);
        const Mat<T> du = nn::relu_backward(u_, conv2_.backward(df));
        return dy + conv1_.backward(du);
    }

    // Per-sequence channel weights of the latest forward, channels x batch.
    const Mat<T>& se_weights() const { return w_; }

private:
    int channels_ = 0;
    nn::Conv2d<T> conv1_, conv2_;
    nn::Linear<T> fc1_, fc2_;
    Mat<T> u_, f_, z_, w_;
    int H_ = 0, W_ = 0;
};

template <class T>
class Llm4cpModel : public SequenceModel<T> {
public:
    static constexpr const char* kBackbonePrefix = "backbone.";

    explicit Llm4cpModel(const ModelConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        const int C = cfg.patches();
        for (int i = 0; i < cfg.n1; ++i)
            csi_freq_.emplace_back(store_, "csi_freq." + std::to_string(i), C, cfg.reduction);
        for (int i = 0; i < cfg.n2; ++i)
            csi_delay_.emplace_back(store_, "csi_delay." + std::to_string(i), C, cfg.reduction);
        embed_ = nn::Linear<T>(store_, "embed", 2 * cfg.K * cfg.N, cfg.F);
        backbone_ = backbone::Backbone<T>(store_, cfg.backbone_config(), kBackbonePrefix);
        head1_ = nn::Linear<T>(store_, "head.fc1", cfg.F, cfg.F);
        head2_ = nn::Linear<T>(store_, "head.fc2", cfg.F, 2 * cfg.K);
        time_ = nn::Linear<T>(store_, "head.time", C, cfg.L);
        pe_ = positional_encoding<T>(cfg.F, C);
        nn::apply_freeze(store_, freeze_mask());
    }

    Llm4cpModel(const Llm4cpModel&) = delete;
    Llm4cpModel& operator=(const Llm4cpModel&) = delete;

    void init(std::uint64_t seed)
    {
        Rng rng(derive_seed(seed, 0, 0x11));
        for (auto& a : csi_freq_)
            a.init_default(rng);
        for (auto& a : csi_delay_)
            a.init_default(rng);
        embed_.init_default(rng);
        head1_.init_default(rng);
        head2_.init_default(rng);
        time_.init_default(rng);
        Rng brng(derive_seed(seed, 0, 0x22));
        backbone_.init_random(brng);
    }

    nn::FreezeMask freeze_mask() const { return backbone::default_freeze_mask(store_, kBackbonePrefix); }

    const ModelConfig& config() const { return cfg_; }
    std::string kind() const override { return "llm4cp"; }
    nn::ParamStore<T>& params() override { return store_; }
    const nn::ParamStore<T>& params() const override { return store_; }
    int horizon() const override { return cfg_.L; }

    backbone::Backbone<T>& backbone() { return backbone_; }
    CsiAttention<T>& freq_attention(int i) { return csi_freq_.at(static_cast<std::size_t>(i)); }
    CsiAttention<T>& delay_attention(int i) { return csi_delay_.at(static_cast<std::size_t>(i)); }
    const Mat<T>& pe() const { return pe_; }

    void load_backbone(const WeightArchive& a) { backbone::load_pretrained(a, store_, backbone_); }

    // Stacks preprocessed views into (P' x sequences*2K*N) planes.
    std::pair<Mat<T>, Mat<T>> planes(const SeqBatch& batch)
    {
        if (batch.K != cfg_.K || batch.P != cfg_.P)
            throw std::invalid_argument("llm4cp: batch shape (K=" + std::to_string(batch.K) + ", P=" +
                                        std::to_string(batch.P) + ") does not match model");
        const int B = batch.size();
        const auto HW = static_cast<Eigen::Index>(2 * cfg_.K) * cfg_.N;
        Mat<T> xf(cfg_.patches(), B * HW), xd(cfg_.patches(), B * HW);
        stats_.clear();
        stats_.reserve(static_cast<std::size_t>(B));
        for (int s = 0; s < B; ++s) {
            const auto pre = preprocess<T>(batch.history[static_cast<std::size_t>(s)], cfg_.N);
            xf.middleCols(s * HW, HW) = pre.freq.data.transpose();
            xd.middleCols(s * HW, HW) = pre.delay.data.transpose();
            stats_.push_back(pre.freq_stats);
        }
        return {std::move(xf), std::move(xd)};
    }

    // Both attention cascades, branch sum, token rearrangement, projection, PE.
    Mat<T> embed(const Mat<T>& xf, const Mat<T>& xd, int B)
    {
        const int H = 2 * cfg_.K, W = cfg_.N, C = cfg_.patches();
        const auto HW = static_cast<Eigen::Index>(H) * W;
        B_ = B;
        Mat<T> a = xf;
        for (auto& blk : csi_freq_)
            a = blk.forward(a, H, W);
        Mat<T> d = xd;
        for (auto& blk : csi_delay_)
            d = blk.forward(d, H, W);
        a += d;
        Mat<T> tokens(HW, static_cast<Eigen::Index>(B) * C);
        for (int s = 0; s < B; ++s)
            for (int j = 0; j < C; ++j)
                tokens.col(static_cast<Eigen::Index>(s) * C + j) = a.row(j).segment(s * HW, HW).transpose();
        Mat<T> e = embed_.forward(tokens);
        for (int s = 0; s < B; ++s)
            e.middleCols(static_cast<Eigen::Index>(s) * C, C) += pe_;
        return e;
    }

    // Backbone output (F x B*P') -> normalized prediction (2K x B*L).
    Mat<T> head(const Mat<T>& o)
    {
        const int C = cfg_.patches(), K2 = 2 * cfg_.K, L = cfg_.L;
        const int B = static_cast<int>(o.cols() / C);
        head_pre_ = head1_.forward(o);
        const Mat<T> v = head2_.forward(nn::gelu(head_pre_));
        Mat<T> m(C, static_cast<Eigen::Index>(B) * K2);
        for (int s = 0; s < B; ++s)
            m.middleCols(static_cast<Eigen::Index>(s) * K2, K2) = v.middleCols(static_cast<Eigen::Index>(s) * C, C).transpose();
        const Mat<T> z = time_.forward(m); // L x B*2K
        Mat<T> y(K2, static_cast<Eigen::Index>(B) * L);
        for (int s = 0; s < B; ++s)
            y.middleCols(static_cast<Eigen::Index>(s) * L, L) = z.middleCols(static_cast<Eigen::Index>(s) * K2, K2).transpose();
        return y;
    }

    Mat<T> forward(const SeqBatch& batch) override
    {
        auto [xf, xd] = planes(batch);
        const int B = batch.size();
        Mat<T> y = head(backbone_.forward(embed(xf, xd, B), B));
        denormalize_output(y, stats_, cfg_.L);
        return y;
    }

    void backward(const Mat<T>& dpred) override
    {
        const int C = cfg_.patches(), K2 = 2 * cfg_.K, L = cfg_.L, B = B_;
        const auto HW = static_cast<Eigen::Index>(K2) * cfg_.N;
        const Mat<T> dy = denormalize_output_backward(dpred, stats_, L);
        Mat<T> dz(L, static_cast<Eigen::Index>(B) * K2);
        for (int s = 0; s < B; ++s)
            dz.middleCols(static_cast<Eigen::Index>(s) * K2, K2) = dy.middleCols(static_cast<Eigen::Index>(s) * L, L).transpose();
        const Mat<T> dm = time_.backward(dz);
        Mat<T> dv(K2, static_cast<Eigen::Index>(B) * C);
        for (int s = 0; s < B; ++s)
            dv.middleCols(static_cast<Eigen::Index>(s) * C, C) = dm.middleCols(static_cast<Eigen::Index>(s) * K2, K2).transpose();
        const Mat<T> dh = head1_.backward(nn::gelu_backward(head_pre_, head2_.backward(dv)));
        const Mat<T> dtokens = embed_.backward(backbone_.backward(dh));
        Mat<T> da(C, B * HW);
        for (int s = 0; s < B; ++s)
            for (int j = 0; j < C; ++j)
                da.row(j).segment(s * HW, HW) = dtokens.col(static_cast<Eigen::Index>(s) * C + j).transpose();
        Mat<T> g = da;
        for (auto it = csi_freq_.rbegin(); it != csi_freq_.rend(); ++it)
            g = it->backward(g);
        g = da;
        for (auto it = csi_delay_.rbegin(); it != csi_delay_.rend(); ++it)
            g = it->backward(g);
    }

    const std::vector<sigproc::NormStats>& last_stats() const { return stats_; }

    void write_config(WeightArchive& a) const override
    {
        const std::pair<const char*, int> fields[] = {
            {"K", cfg_.K},           {"P", cfg_.P},         {"L", cfg_.L},
            {"N", cfg_.N},           {"F", cfg_.F},         {"layers", cfg_.layers},
            {"heads", cfg_.heads},   {"n1", cfg_.n1},       {"n2", cfg_.n2},
            {"reduction", cfg_.reduction}, {"max_positions", cfg_.max_positions}, {"causal", cfg_.causal ? 1 : 0}};
        for (const auto& [k, v] : fields)
            a.put_scalar(std::string("config.") + k, v);
    }

    static ModelConfig read_config(const WeightArchive& a)
    {
        ModelConfig c;
        const auto get = [&](const char* k) { return static_cast<int>(a.get_scalar(std::string("config.") + k)); };
        c.K = get("K");
        c.P = get("P");
        c.L = get("L");
        c.N = get("N");
        c.F = get("F");
        c.layers = get("layers");
        c.heads = get("heads");
        c.n1 = get("n1");
        c.n2 = get("n2");
        c.reduction = get("reduction");
        c.max_positions = get("max_positions");
        c.causal = get("causal") != 0;
        return c;
    }

private:
    ModelConfig cfg_;
    nn::ParamStore<T> store_;
    std::vector<CsiAttention<T>> csi_freq_, csi_delay_;
    nn::Linear<T> embed_;
    backbone::Backbone<T> backbone_;
    nn::Linear<T> head1_, head2_, time_;
    Mat<T> pe_;
    Mat<T> head_pre_;
    std::vector<sigproc::NormStats> stats_;
    int B_ = 0;
};

} // namespace llm4cp

#endif
