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

#ifndef LLM4CP_BASELINES_RECURRENT_HPP
#define LLM4CP_BASELINES_RECURRENT_HPP

#include "../nn/layers.hpp"
#include "../predictor.hpp"

// Stacked RNN / LSTM / GRU over the realified history, with a linear head
// from the last hidden state to all L future steps at once. Gate layouts
// follow the common (i, f, g, o) and (r, z, n) conventions with separate
// input and hidden biases.

namespace llm4cp::baselines {

enum class Cell { RNN, LSTM, GRU };

inline std::string to_string(Cell c)
{
    switch (c) {
    case Cell::RNN:
        return "rnn";
    case Cell::LSTM:
        return "lstm";
    case Cell::GRU:
        return "gru";
    }
    return "?";
}

inline int gate_count(Cell c) { return c == Cell::RNN ? 1 : c == Cell::LSTM ? 4 : 3; }

struct RecurrentConfig {
    Cell cell = Cell::LSTM;
    int layers = 4;
    int hidden = 188;
    int K = 48;
    int P = 16;
    int L = 4;

    void validate() const
    {
        if (layers < 1 || hidden < 1 || K < 1 || P < 1 || L < 1)
            throw ConfigError("recurrent: layers, hidden, K, P and L must be positive");
    }

    // Hidden widths that put each cell near its reference parameter budget at K=48.
    static int default_hidden(Cell c) { return c == Cell::RNN ? 176 : 188; }
};

template <class T>
class RecurrentLayer {
public:
    RecurrentLayer() = default;
    RecurrentLayer(nn::ParamStore<T>& s, const std::string& p, Cell cell, int in, int hidden)
        : cell_(cell), H_(hidden), wx_(s, p + ".ih", in, gate_count(cell) * hidden),
          wh_(s, p + ".hh", hidden, gate_count(cell) * hidden)
    {
    }

    void init_default(Rng& rng)
    {
        // U(-1/sqrt(H), 1/sqrt(H)) everywhere, as recurrent layers are usually initialized.
        const double bound = 1.0 / std::sqrt(static_cast<double>(H_));
        for (auto* l : {&wx_, &wh_}) {
            nn::init_uniform(l->weight(), bound, rng);
            nn::init_uniform(l->bias(), bound, rng);
        }
    }

    // xs[t]: in x B. Returns hidden states h_1..h_P.
    std::vector<Mat<T>> forward(const std::vector<Mat<T>>& xs)
    {
        const auto P = static_cast<int>(xs.size());
        const auto B = xs.front().cols();
        const auto G = gate_count(cell_);
        xs_ = xs;
        hs_.assign(static_cast<std::size_t>(P) + 1, Mat<T>::Zero(H_, B));
        cs_.assign(static_cast<std::size_t>(P) + 1, Mat<T>::Zero(H_, B));
        gates_.assign(static_cast<std::size_t>(P), Mat<T>());
        hn_.assign(static_cast<std::size_t>(P), Mat<T>());
        for (int t = 0; t < P; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            const Mat<T> gx = wx_.apply(xs[ti]);
            const Mat<T> gh = wh_.apply(hs_[ti]);
            Mat<T> a(G * H_, B);
            switch (cell_) {
            case Cell::RNN:
                a = (gx + gh).array().tanh().matrix();
                hs_[ti + 1] = a;
                break;
            case Cell::LSTM: {
                const Mat<T> z = gx + gh;
                a.topRows(2 * H_) = nn::sigmoid<T>(z.topRows(2 * H_));
                a.middleRows(2 * H_, H_) = z.middleRows(2 * H_, H_).array().tanh().matrix();
                a.bottomRows(H_) = nn::sigmoid<T>(z.bottomRows(H_));
                cs_[ti + 1] = a.middleRows(H_, H_).cwiseProduct(cs_[ti]) + a.topRows(H_).cwiseProduct(a.middleRows(2 * H_, H_));
                hs_[ti + 1] = a.bottomRows(H_).cwiseProduct(cs_[ti + 1].array().tanh().matrix());
                break;
            }
            case Cell::GRU: {
                a.topRows(2 * H_) = nn::sigmoid<T>((gx.topRows(2 * H_) + gh.topRows(2 * H_)).eval());
                hn_[ti] = gh.bottomRows(H_); // W_hn h + b_hn
                a.bottomRows(H_) =
                    (gx.bottomRows(H_) + a.topRows(H_).cwiseProduct(hn_[ti])).array().tanh().matrix();
                const auto z = a.middleRows(H_, H_);
                hs_[ti + 1] = (T(1) - z.array()).matrix().cwiseProduct(a.bottomRows(H_)) + z.cwiseProduct(hs_[ti]);
                break;
            }
            }
            gates_[ti] = std::move(a);
        }
        return {hs_.begin() + 1, hs_.end()};
    }

    // dhs[t]: gradient arriving at h_{t+1} from above. Returns input gradients.
    std::vector<Mat<T>> backward(const std::vector<Mat<T>>& dhs)
    {
        const auto P = static_cast<int>(xs_.size());
        const auto B = xs_.front().cols();
        const int G = gate_count(cell_);
        std::vector<Mat<T>> dxs(static_cast<std::size_t>(P));
        Mat<T> dh_next = Mat<T>::Zero(H_, B);
        Mat<T> dc_next = Mat<T>::Zero(H_, B);
        // Accumulate gate pre-activation gradients for one GEMM per weight at the end.
        Mat<T> dgx_all(G * H_, P * B), dgh_all(G * H_, P * B), hprev_all(H_, P * B), x_all(xs_.front().rows(), P * B);
        for (int t = P - 1; t >= 0; --t) {
            const auto ti = static_cast<std::size_t>(t);
            const Mat<T> dh = dhs[ti] + dh_next;
            const Mat<T>& a = gates_[ti];
            Mat<T> dgx(G * H_, B), dgh(G * H_, B);
            switch (cell_) {
            case Cell::RNN:
                dgx = dh.cwiseProduct((T(1) - a.array().square()).matrix());
                dgh = dgx;
                break;
            case Cell::LSTM: {
                const auto i = a.topRows(H_), f = a.middleRows(H_, H_), g = a.middleRows(2 * H_, H_), o = a.bottomRows(H_);
                const Mat<T> tc = cs_[ti + 1].array().tanh().matrix();
                const Mat<T> dc = dc_next + dh.cwiseProduct(o).cwiseProduct((T(1) - tc.array().square()).matrix());
                dgx.topRows(H_) = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((T(1) - i.array()).matrix()));
                dgx.middleRows(H_, H_) = dc.cwiseProduct(cs_[ti]).cwiseProduct(f.cwiseProduct((T(1) - f.array()).matrix()));
                dgx.middleRows(2 * H_, H_) = dc.cwiseProduct(i).cwiseProduct((T(1) - g.array().square()).matrix());
                dgx.bottomRows(H_) = dh.cwiseProduct(tc).cwiseProduct(o.cwiseProduct((T(1) - o.array()).matrix()));
                dgh = dgx;
                dc_next = dc.cwiseProduct(f);
                break;
            }
            case Cell::GRU: {
                const auto r = a.topRows(H_), z = a.middleRows(H_, H_), n = a.bottomRows(H_);
                const Mat<T> dn = dh.cwiseProduct((T(1) - z.array()).matrix());
                const Mat<T> dz = dh.cwiseProduct(hs_[ti] - n);
                const Mat<T> dpre_n = dn.cwiseProduct((T(1) - n.array().square()).matrix());
                const Mat<T> dr = dpre_n.cwiseProduct(hn_[ti]);
                dgx.topRows(H_) = dr.cwiseProduct(r.cwiseProduct((T(1) - r.array()).matrix()));
                dgx.middleRows(H_, H_) = dz.cwiseProduct(z.cwiseProduct((T(1) - z.array()).matrix()));
                dgx.bottomRows(H_) = dpre_n;
                dgh.topRows(2 * H_) = dgx.topRows(2 * H_);
                dgh.bottomRows(H_) = dpre_n.cwiseProduct(r);
                break;
            }
            }
            dh_next = wh_.weight().value.transpose() * dgh;
            if (cell_ == Cell::GRU)
                dh_next += dh.cwiseProduct(a.middleRows(H_, H_));
            dxs[ti] = wx_.weight().value.transpose() * dgx;
            dgx_all.middleCols(t * B, B) = dgx;
            dgh_all.middleCols(t * B, B) = dgh;
            hprev_all.middleCols(t * B, B) = hs_[ti];
            x_all.middleCols(t * B, B) = xs_[ti];
        }
        accumulate(wx_, dgx_all, x_all);
        accumulate(wh_, dgh_all, hprev_all);
        return dxs;
    }

private:
    static void accumulate(nn::Linear<T>& l, const Mat<T>& dg, const Mat<T>& in)
    {
        if (l.weight().wants_grad())
            l.weight().grad.noalias() += dg * in.transpose();
        if (l.bias().wants_grad())
            l.bias().grad.col(0) += dg.rowwise().sum();
    }

    Cell cell_ = Cell::RNN;
    int H_ = 0;
    nn::Linear<T> wx_, wh_;
    std::vector<Mat<T>> xs_, hs_, cs_, gates_, hn_;
};

template <class T>
class RecurrentModel : public SequenceModel<T> {
public:
    explicit RecurrentModel(const RecurrentConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        for (int i = 0; i < cfg.layers; ++i)
            layers_.emplace_back(store_, "rnn." + std::to_string(i), cfg.cell, i == 0 ? 2 * cfg.K : cfg.hidden, cfg.hidden);
        head_ = nn::Linear<T>(store_, "head", cfg.hidden, cfg.L * 2 * cfg.K);
    }

    RecurrentModel(const RecurrentModel&) = delete;
    RecurrentModel& operator=(const RecurrentModel&) = delete;

    void init(std::uint64_t seed)
    {
        Rng rng(derive_seed(seed, 0, 0x33));
        for (auto& l : layers_)
            l.init_default(rng);
        head_.init_default(rng);
    }

    std::string kind() const override { return to_string(cfg_.cell); }
    nn::ParamStore<T>& params() override { return store_; }
    const nn::ParamStore<T>& params() const override { return store_; }
    int horizon() const override { return cfg_.L; }
    const RecurrentConfig& config() const { return cfg_; }

    Mat<T> forward(const SeqBatch& batch) override
    {
        if (batch.K != cfg_.K || batch.P != cfg_.P)
            throw std::invalid_argument(kind() + ": batch shape does not match model");
        auto norm = normalize_history<T>(batch);
        stats_ = std::move(norm.stats);
        const int B = batch.size(), P = cfg_.P, K2 = 2 * cfg_.K, L = cfg_.L;
        std::vector<Mat<T>> seq(static_cast<std::size_t>(P), Mat<T>(K2, B));
        for (int s = 0; s < B; ++s)
            for (int t = 0; t < P; ++t)
                seq[static_cast<std::size_t>(t)].col(s) = norm.x.col(static_cast<Eigen::Index>(s) * P + t);
        for (auto& l : layers_)
            seq = l.forward(seq);
        const Mat<T> o = head_.forward(seq.back()); // (L*2K) x B, row l*2K + r
        Mat<T> y(K2, static_cast<Eigen::Index>(B) * L);
        for (int s = 0; s < B; ++s)
            for (int l = 0; l < L; ++l)
                y.col(static_cast<Eigen::Index>(s) * L + l) = o.col(s).segment(static_cast<Eigen::Index>(l) * K2, K2);
        denormalize_output(y, stats_, L);
        return y;
    }

    void backward(const Mat<T>& dpred) override
    {
        const int K2 = 2 * cfg_.K, L = cfg_.L, P = cfg_.P;
        const Mat<T> dy = denormalize_output_backward(dpred, stats_, L);
        const auto B = dy.cols() / L;
        Mat<T> dout(static_cast<Eigen::Index>(L) * K2, B);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int l = 0; l < L; ++l)
                dout.col(s).segment(static_cast<Eigen::Index>(l) * K2, K2) = dy.col(s * L + l);
        std::vector<Mat<T>> dh(static_cast<std::size_t>(P), Mat<T>::Zero(cfg_.hidden, B));
        dh.back() = head_.backward(dout);
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            dh = it->backward(dh);
    }

    void write_config(WeightArchive& a) const override
    {
        a.put_scalar("config.cell", static_cast<double>(cfg_.cell));
        a.put_scalar("config.layers", cfg_.layers);
        a.put_scalar("config.hidden", cfg_.hidden);
        a.put_scalar("config.K", cfg_.K);
        a.put_scalar("config.P", cfg_.P);
        a.put_scalar("config.L", cfg_.L);
    }

private:
    RecurrentConfig cfg_;
    nn::ParamStore<T> store_;
    std::vector<RecurrentLayer<T>> layers_;
    nn::Linear<T> head_;
    std::vector<sigproc::NormStats> stats_;
};

} // namespace llm4cp::baselines

#endif
