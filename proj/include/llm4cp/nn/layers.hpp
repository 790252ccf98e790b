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

#ifndef LLM4CP_NN_LAYERS_HPP
#define LLM4CP_NN_LAYERS_HPP

#include "param_store.hpp"

#include <cmath>
#include <type_traits>
#include <string>
#include <vector>

// Layers with hand-written reverse mode. Activations are feature-major:
// a batch of tokens is a (features x tokens) matrix, one token per column.
// Each layer caches what its backward pass needs from the latest forward,
// so a layer instance serves one forward/backward pair at a time.

namespace llm4cp::nn {

// ---- elementwise activations ---------------------------------------------

template <class T>
Mat<T> relu(const Mat<T>& x)
{
    return x.cwiseMax(T(0));
}

template <class T>
Mat<T> relu_backward(const Mat<T>& x, const Mat<T>& dy)
{
    return (x.array() > T(0)).select(dy, T(0));
}

template <class T>
Mat<T> sigmoid(const Mat<T>& x)
{
    return (T(1) / (T(1) + (-x.array()).exp())).matrix();
}

// tanh-approximated GELU
template <class T>
Mat<T> gelu(const Mat<T>& x)
{
    const T c = static_cast<T>(std::sqrt(2.0 / kPi));
    const auto a = x.array();
    return (T(0.5) * a * (T(1) + (c * (a + T(0.044715) * a.cube())).tanh())).matrix();
}

template <class T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy)
{
    const T c = static_cast<T>(std::sqrt(2.0 / kPi));
    const auto a = x.array();
    const auto th = (c * (a + T(0.044715) * a.cube())).tanh().eval();
    const auto d = (T(0.5) * (T(1) + th) + T(0.5) * a * (T(1) - th.square()) * c * (T(1) + T(3 * 0.044715) * a.square())).eval();
    return (d * dy.array()).matrix();
}

// ---- Linear ----------------------------------------------------------------

// y = W x + b with W stored (out x in).
template <class T>
class Linear {
public:
    Linear() = default;
    Linear(ParamStore<T>& store, const std::string& prefix, int in, int out, bool trainable = true)
        : w_(&store.add(prefix + ".weight", out, in, trainable)), b_(&store.add(prefix + ".bias", out, 1, trainable))
    {
    }

    // PyTorch-style default: U(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
    void init_default(Rng& rng)
    {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w_->value.cols()));
        init_uniform(*w_, bound, rng);
        init_uniform(*b_, bound, rng);
    }

    Mat<T> forward(const Mat<T>& x)
    {
        x_ = x;
        return apply(x);
    }

    Mat<T> apply(const Mat<T>& x) const
    {
        Mat<T> y = w_->value * x;
        y.colwise() += b_->value.col(0);
        return y;
    }

    Mat<T> backward(const Mat<T>& dy)
    {
        if (w_->wants_grad())
            w_->grad.noalias() += dy * x_.transpose();
        if (b_->wants_grad())
            b_->grad.col(0) += dy.rowwise().sum();
        return w_->value.transpose() * dy;
    }

    Tensor<T>& weight() { return *w_; }
    Tensor<T>& bias() { return *b_; }
    int in_features() const { return static_cast<int>(w_->value.cols()); }
    int out_features() const { return static_cast<int>(w_->value.rows()); }

private:
    Tensor<T>* w_ = nullptr;
    Tensor<T>* b_ = nullptr;
    Mat<T> x_;
};

// ---- LayerNorm -------------------------------------------------------------

template <class T>
class LayerNorm {
public:
    static constexpr double kEps = 1e-5;

    LayerNorm() = default;
    LayerNorm(ParamStore<T>& store, const std::string& prefix, int features, bool trainable = true)
        : g_(&store.add(prefix + ".weight", features, 1, trainable)), b_(&store.add(prefix + ".bias", features, 1, trainable))
    {
        g_->value.setOnes();
    }

    Mat<T> forward(const Mat<T>& x)
    {
        const auto F = x.rows();
        const RowVec<T> mean = x.colwise().mean();
        xhat_ = x.rowwise() - mean;
        const RowVec<T> var = xhat_.array().square().colwise().sum() / static_cast<T>(F);
        rstd_ = (var.array() + static_cast<T>(kEps)).rsqrt().matrix();
        xhat_ = xhat_ * rstd_.asDiagonal();
        Mat<T> y = g_->value.col(0).asDiagonal() * xhat_;
        y.colwise() += b_->value.col(0);
        return y;
    }

    Mat<T> backward(const Mat<T>& dy)
    {
        const auto F = static_cast<T>(dy.rows());
        if (g_->wants_grad())
            g_->grad.col(0) += dy.cwiseProduct(xhat_).rowwise().sum();
        if (b_->wants_grad())
            b_->grad.col(0) += dy.rowwise().sum();
        const Mat<T> dxhat = g_->value.col(0).asDiagonal() * dy;
        const RowVec<T> m1 = dxhat.colwise().sum() / F;
        const RowVec<T> m2 = dxhat.cwiseProduct(xhat_).colwise().sum() / F;
        Mat<T> dx = dxhat.rowwise() - m1;
        dx -= xhat_ * m2.asDiagonal();
        return dx * rstd_.asDiagonal();
    }

    Tensor<T>& weight() { return *g_; }
    Tensor<T>& bias() { return *b_; }

private:
    Tensor<T>* g_ = nullptr;
    Tensor<T>* b_ = nullptr;
    Mat<T> xhat_;
    RowVec<T> rstd_;
};

// ---- Conv2d (3x3, stride 1, zero padding 1) ----------------------------------

// Input layout: (channels x B*H*W), column index b*H*W + h*W + w.
// Weight (out x in*9), column index c*9 + (dh+1)*3 + (dw+1).
template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamStore<T>& store, const std::string& prefix, int in, int out, bool trainable = true)
        : in_(in), w_(&store.add(prefix + ".weight", out, in * 9, trainable)),
          b_(&store.add(prefix + ".bias", out, 1, trainable))
    {
    }

    void init_default(Rng& rng)
    {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * 9));
        init_uniform(*w_, bound, rng);
        init_uniform(*b_, bound, rng);
    }

    Mat<T> forward(const Mat<T>& x, int H, int W)
    {
        H_ = H;
        W_ = W;
        x_ = x;
        Mat<T> y = w_->value * im2col(x, H, W);
        y.colwise() += b_->value.col(0);
        return y;
    }

    Mat<T> backward(const Mat<T>& dy)
    {
        if (w_->wants_grad())
            w_->grad.noalias() += dy * im2col(x_, H_, W_).transpose();
        if (b_->wants_grad())
            b_->grad.col(0) += dy.rowwise().sum();
        const Mat<T> dcols = w_->value.transpose() * dy;
        return col2im(dcols, H_, W_);
    }

    Mat<T> im2col(const Mat<T>& x, int H, int W) const
    {
        if (x.rows() != in_ || x.cols() % (H * W) != 0)
            throw std::invalid_argument("Conv2d: input shape mismatch");
        const auto HW = static_cast<Eigen::Index>(H) * W;
        const auto B = x.cols() / HW;
        Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(in_) * 9, x.cols());
        for (Eigen::Index b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const auto col = b * HW + h * W + w;
                    for (int dh = -1; dh <= 1; ++dh) {
                        const int hh = h + dh;
                        if (hh < 0 || hh >= H)
                            continue;
                        for (int dw = -1; dw <= 1; ++dw) {
                            const int ww = w + dw;
                            if (ww < 0 || ww >= W)
                                continue;
                            const auto src = b * HW + hh * W + ww;
                            const int k = (dh + 1) * 3 + (dw + 1);
                            for (int c = 0; c < in_; ++c)
                                cols(c * 9 + k, col) = x(c, src);
                        }
                    }
                }
        return cols;
    }

    Mat<T> col2im(const Mat<T>& cols, int H, int W) const
    {
        const auto HW = static_cast<Eigen::Index>(H) * W;
        const auto B = cols.cols() / HW;
        Mat<T> x = Mat<T>::Zero(in_, cols.cols());
        for (Eigen::Index b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const auto col = b * HW + h * W + w;
                    for (int dh = -1; dh <= 1; ++dh) {
                        const int hh = h + dh;
                        if (hh < 0 || hh >= H)
                            continue;
                        for (int dw = -1; dw <= 1; ++dw) {
                            const int ww = w + dw;
                            if (ww < 0 || ww >= W)
                                continue;
                            const auto dst = b * HW + hh * W + ww;
                            const int k = (dh + 1) * 3 + (dw + 1);
                            for (int c = 0; c < in_; ++c)
                                x(c, dst) += cols(c * 9 + k, col);
                        }
                    }
                }
        return x;
    }

    Tensor<T>& weight() { return *w_; }
    Tensor<T>& bias() { return *b_; }

private:
    int in_ = 0;
    Tensor<T>* w_ = nullptr;
    Tensor<T>* b_ = nullptr;
    Mat<T> x_; // im2col is recomputed in backward to keep the cache small
    int H_ = 0, W_ = 0;
};

// ---- Multi-head attention ----------------------------------------------------

// Queries come from xq (D x B*Sq), keys/values from xkv (D x B*Skv); both
// are laid out sequence-major per batch entry. With causal=true, query i
// sees keys 0..i (requires Sq == Skv).
template <class T>
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore<T>& store, const std::string& prefix, int dim, int heads, bool trainable = true)
        : heads_(heads), q_(store, prefix + ".q", dim, dim, trainable), k_(store, prefix + ".k", dim, dim, trainable),
          v_(store, prefix + ".v", dim, dim, trainable), o_(store, prefix + ".o", dim, dim, trainable)
    {
        if (heads < 1 || dim % heads != 0)
            throw std::invalid_argument("MultiHeadAttention: dim must be divisible by heads");
    }

    void init_normal_all(double stddev, Rng& rng)
    {
        for (auto* l : {&q_, &k_, &v_, &o_}) {
            init_normal(l->weight(), stddev, rng);
            l->bias().value.setZero();
        }
    }

    void init_default(Rng& rng)
    {
        for (auto* l : {&q_, &k_, &v_, &o_})
            l->init_default(rng);
    }

    Mat<T> forward(const Mat<T>& xq, const Mat<T>& xkv, int batch, bool causal)
    {
        B_ = batch;
        Sq_ = static_cast<int>(xq.cols() / batch);
        Skv_ = static_cast<int>(xkv.cols() / batch);
        if (causal && Sq_ != Skv_)
            throw std::invalid_argument("MultiHeadAttention: causal mask needs equal query/key lengths");
        causal_ = causal;
        Q_ = q_.forward(xq);
        K_ = k_.forward(xkv);
        V_ = v_.forward(xkv);
        const int D = static_cast<int>(Q_.rows());
        const int dh = D / heads_;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        probs_.assign(static_cast<std::size_t>(B_) * heads_, Mat<T>());
        Mat<T> ctx(D, xq.cols());
        for (int b = 0; b < B_; ++b)
            for (int h = 0; h < heads_; ++h) {
                const auto Qb = Q_.block(h * dh, b * Sq_, dh, Sq_);
                const auto Kb = K_.block(h * dh, b * Skv_, dh, Skv_);
                const auto Vb = V_.block(h * dh, b * Skv_, dh, Skv_);
                Mat<T> S = (Kb.transpose() * Qb) * scale; // Skv x Sq, column per query
                for (int i = 0; i < Sq_; ++i) {
                    const int visible = causal ? i + 1 : Skv_;
                    const T mx = S.col(i).head(visible).maxCoeff();
                    T sum = 0;
                    for (int j = 0; j < Skv_; ++j) {
                        const T e = j < visible ? std::exp(S(j, i) - mx) : T(0);
                        S(j, i) = e;
                        sum += e;
                    }
                    S.col(i) /= sum;
                }
                ctx.block(h * dh, b * Sq_, dh, Sq_).noalias() = Vb * S;
                probs_[static_cast<std::size_t>(b) * heads_ + h] = std::move(S);
            }
        return o_.forward(ctx);
    }

    Mat<T> forward(const Mat<T>& x, int batch, bool causal) { return forward(x, x, batch, causal); }

    // Returns (dxq, dxkv).
    std::pair<Mat<T>, Mat<T>> backward_pair(const Mat<T>& dy)
    {
        const Mat<T> dctx = o_.backward(dy);
        const int D = static_cast<int>(Q_.rows());
        const int dh = D / heads_;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        Mat<T> dQ(D, Q_.cols()), dK(D, K_.cols()), dV(D, V_.cols());
        for (int b = 0; b < B_; ++b)
            for (int h = 0; h < heads_; ++h) {
                const auto& A = probs_[static_cast<std::size_t>(b) * heads_ + h];
                const auto Qb = Q_.block(h * dh, b * Sq_, dh, Sq_);
                const auto Kb = K_.block(h * dh, b * Skv_, dh, Skv_);
                const auto Vb = V_.block(h * dh, b * Skv_, dh, Skv_);
                const auto dC = dctx.block(h * dh, b * Sq_, dh, Sq_);
                dV.block(h * dh, b * Skv_, dh, Skv_).noalias() = dC * A.transpose();
                const Mat<T> dA = Vb.transpose() * dC;
                const RowVec<T> dot = A.cwiseProduct(dA).colwise().sum();
                const Mat<T> dS = (A.array() * (dA.rowwise() - dot).array()).matrix() * scale;
                dQ.block(h * dh, b * Sq_, dh, Sq_).noalias() = Kb * dS;
                dK.block(h * dh, b * Skv_, dh, Skv_).noalias() = Qb * dS.transpose();
            }
        Mat<T> dxq = q_.backward(dQ);
        Mat<T> dxkv = k_.backward(dK);
        dxkv += v_.backward(dV);
        return {std::move(dxq), std::move(dxkv)};
    }

    // Self-attention gradient: both input roles summed.
    Mat<T> backward(const Mat<T>& dy)
    {
        auto [dq, dkv] = backward_pair(dy);
        return dq + dkv;
    }

    Linear<T>& query() { return q_; }
    Linear<T>& key() { return k_; }
    Linear<T>& value() { return v_; }
    Linear<T>& out() { return o_; }
    int heads() const { return heads_; }

private:
    int heads_ = 1;
    Linear<T> q_, k_, v_, o_;
    Mat<T> Q_, K_, V_;
    std::vector<Mat<T>> probs_;
    int B_ = 0, Sq_ = 0, Skv_ = 0;
    bool causal_ = false;
};

// ---- Adam ----------------------------------------------------------------------

template <class T>
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam(ParamStore<T>& store, Options opt) : store_(&store), opt_(opt)
    {
        m_.resize(store.size());
        v_.resize(store.size());
        for (std::size_t i = 0; i < store.size(); ++i) {
            m_[i] = Mat<T>::Zero(store[i].value.rows(), store[i].value.cols());
            v_[i] = m_[i];
        }
    }

    void set_lr(double lr) { opt_.lr = lr; }
    double lr() const { return opt_.lr; }
    std::uint64_t steps() const { return t_; }

    // Updates trainable tensors only; frozen tensors are never written.
    void step()
    {
        ++t_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
        const T step = static_cast<T>(opt_.lr / bc1);
        const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
        const T eps = static_cast<T>(opt_.eps);
        for (std::size_t i = 0; i < store_->size(); ++i) {
            auto& t = (*store_)[i];
            if (!t.trainable)
                continue;
            m_[i] = b1 * m_[i] + (T(1) - b1) * t.grad;
            v_[i] = b2 * v_[i] + (T(1) - b2) * t.grad.cwiseAbs2();
            t.value.array() -= step * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_bc2 + eps);
        }
    }

    // Moment buffers, in store order, for checkpointing.
    std::vector<Mat<T>>& first_moments() { return m_; }
    std::vector<Mat<T>>& second_moments() { return v_; }
    void set_steps(std::uint64_t t) { t_ = t; }

private:
    ParamStore<T>* store_;
    Options opt_;
    std::vector<Mat<T>> m_, v_;
    std::uint64_t t_ = 0;
};

} // namespace llm4cp::nn

#endif
