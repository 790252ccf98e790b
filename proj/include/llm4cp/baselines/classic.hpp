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

#ifndef LLM4CP_BASELINES_CLASSIC_HPP
#define LLM4CP_BASELINES_CLASSIC_HPP

#include "../predictor.hpp"

#include <Eigen/SVD>

// Training-free predictors: sample-and-hold, and linear prediction of
// complex exponentials in the beam-delay domain.

namespace llm4cp::baselines {

inline chansim::CsiTensor no_prediction(const chansim::CsiTensor& uplink, int horizon)
{
    if (uplink.steps < 1)
        throw std::invalid_argument("no_prediction: empty history");
    chansim::CsiTensor out(horizon, uplink.subcarriers, uplink.antennas);
    for (int l = 0; l < horizon; ++l)
        for (int k = 0; k < uplink.subcarriers; ++k)
            for (int n = 0; n < uplink.antennas; ++n)
                out(l, k, n) = uplink(uplink.steps - 1, k, n);
    return out;
}

class NoPrediction : public Predictor {
public:
    std::string id() const override { return "no_prediction"; }
    std::vector<chansim::CsiTensor> predict(const SamplePtrs& samples, int horizon) override
    {
        std::vector<chansim::CsiTensor> out;
        out.reserve(samples.size());
        for (const auto* s : samples)
            out.push_back(no_prediction(s->uplink, horizon));
        return out;
    }
};

struct PadConfig {
    int order = 8;
    double ridge = 1e-20; // numerical rank floor, relative to the mean equation-row energy

    int window() const { return 2 * order - 1; }

    void validate(int history) const
    {
        if (order < 1)
            throw ConfigError("pad: order must be >= 1");
        if (ridge < 0.0)
            throw ConfigError("pad: ridge factor must be >= 0");
        if (window() > history)
            throw ConfigError("pad: 2*order-1 = " + std::to_string(window()) + " exceeds history length " +
                              std::to_string(history));
    }
};

struct PronyStats {
    std::size_t fits = 0;
    std::size_t floored = 0; // fits where singular directions fell under the floor
};

// Fits x[t] = sum_i a_i x[t-i] (i = 1..order) to the last 2*order-1
// samples and extrapolates `steps` values recursively. Forward equations are
// stacked with their conjugate-backward counterparts (exact for undamped
// exponentials), which gives 2*order-2 equations for `order` unknowns.
// Directions whose squared singular value does not exceed
// ridge * (mean row energy) are dropped from the least-squares solve.
inline CVec prony_extrapolate(const CVec& x, int steps, const PadConfig& cfg, PronyStats* stats = nullptr)
{
    const int p = cfg.order;
    const int m = cfg.window();
    if (x.size() < m)
        throw std::invalid_argument("prony_extrapolate: need at least 2*order-1 samples");
    const CVec w = x.tail(m);
    const int rows_each = m - p;
    CMat A(2 * rows_each, p);
    CVec b(2 * rows_each);
    for (int r = 0; r < rows_each; ++r) {
        const int t = p + r; // forward: w[t] from w[t-1..t-p]
        for (int i = 1; i <= p; ++i)
            A(r, i - 1) = w(t - i);
        b(r) = w(t);
        const int s = r; // backward: conj(w[s]) from conj(w[s+1..s+p])
        for (int i = 1; i <= p; ++i)
            A(rows_each + r, i - 1) = std::conj(w(s + i));
        b(rows_each + r) = std::conj(w(s));
    }

    CVec out(steps);
    if (stats)
        ++stats->fits;
    const double row_energy = A.rowwise().squaredNorm().mean();
    if (!(row_energy > 0.0)) {
        out.setZero();
        return out;
    }
    Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double floor = cfg.ridge * row_energy;
    const CVec ub = svd.matrixU().adjoint() * b;
    CVec coef = CVec::Zero(p);
    bool floored = false;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) * sv(i) <= floor) {
            floored = true;
            continue;
        }
        coef += svd.matrixV().col(i) * (ub(i) / sv(i));
    }
    if (floored && stats)
        ++stats->floored;

    CVec hist(p + steps);
    hist.head(p) = w.tail(p);
    for (int s = 0; s < steps; ++s) {
        cf64 acc = 0.0;
        for (int i = 1; i <= p; ++i)
            acc += coef(i - 1) * hist(p + s - i);
        hist(p + s) = acc;
        out(s) = acc;
    }
    return out;
}

// Full-array prediction: spatial DFT over antennas and unitary IDFT over
// subcarriers, one linear predictor per beam-delay bin, then back.
inline chansim::CsiTensor pad_predict(const chansim::CsiTensor& uplink, int horizon, const PadConfig& cfg,
                                      PronyStats* stats = nullptr)
{
    cfg.validate(uplink.steps);
    const int P = uplink.steps, K = uplink.subcarriers, Nt = uplink.antennas;
    const CMat Fk = sigproc::dft_matrix(K);
    const CMat Fn = sigproc::dft_matrix(Nt);
    const CMat FkH = Fk.adjoint();
    const CMat FnH = Fn.adjoint();

    std::vector<CMat> bins(static_cast<std::size_t>(P));
    for (int t = 0; t < P; ++t) {
        CMat h(K, Nt);
        for (int k = 0; k < K; ++k)
            for (int n = 0; n < Nt; ++n)
                h(k, n) = cf64(uplink(t, k, n));
        bins[static_cast<std::size_t>(t)] = FkH * h * Fn;
    }

    std::vector<CMat> future(static_cast<std::size_t>(horizon), CMat(K, Nt));
    CVec series(P);
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < Nt; ++n) {
            for (int t = 0; t < P; ++t)
                series(t) = bins[static_cast<std::size_t>(t)](k, n);
            const CVec ext = prony_extrapolate(series, horizon, cfg, stats);
            for (int l = 0; l < horizon; ++l)
                future[static_cast<std::size_t>(l)](k, n) = ext(l);
        }

    chansim::CsiTensor out(horizon, K, Nt);
    for (int l = 0; l < horizon; ++l) {
        const CMat h = Fk * future[static_cast<std::size_t>(l)] * FnH;
        for (int k = 0; k < K; ++k)
            for (int n = 0; n < Nt; ++n)
                out(l, k, n) = cf32(h(k, n));
    }
    return out;
}

class PadPredictor : public Predictor {
public:
    explicit PadPredictor(PadConfig cfg = {}) : cfg_(cfg) {}
    std::string id() const override { return "pad"; }
    std::vector<chansim::CsiTensor> predict(const SamplePtrs& samples, int horizon) override
    {
        std::vector<chansim::CsiTensor> out;
        out.reserve(samples.size());
        for (const auto* s : samples)
            out.push_back(pad_predict(s->uplink, horizon, cfg_, &stats_));
        return out;
    }
    const PronyStats& stats() const { return stats_; }

private:
    PadConfig cfg_;
    PronyStats stats_;
};

} // namespace llm4cp::baselines

#endif
