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

#ifndef LLM4CP_TESTS_SUPPORT_HPP
#define LLM4CP_TESTS_SUPPORT_HPP

#include "llm4cp/predictor.hpp"
#include "llm4cp/training.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

// Shared helpers for the unit tests.

namespace llm4cp::test_support {

template <class T>
Mat<T> random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0)
{
    std::normal_distribution<double> n(0.0, scale);
    Mat<T> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<T>(n(rng));
    return m;
}

inline CMat random_cmat(Rng& rng, int r, int c)
{
    std::normal_distribution<double> n(0.0, 1.0);
    CMat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = cf64(n(rng), n(rng));
    return m;
}

inline SeqBatch random_batch(Rng& rng, int K, int P, int sequences)
{
    SeqBatch b;
    b.K = K;
    b.P = P;
    b.antennas = 1;
    for (int s = 0; s < sequences; ++s)
        b.history.push_back(random_cmat(rng, K, P));
    return b;
}

inline double loss_of(SequenceModel<double>& m, const SeqBatch& b, const Mat<double>& truth, int L)
{
    return training::nmse_batch<double>(m.forward(b), truth, 1, L, false).loss;
}

// Central-difference check of the reverse-mode gradient on a few entries
// per tensor. Returns the worst per-tensor relative error and its name.
inline std::pair<double, std::string> gradient_check(SequenceModel<double>& m, const SeqBatch& b, const Mat<double>& truth,
                                              int L, const std::function<bool(const std::string&)>& include, Rng& rng)
{
    auto& store = m.params();
    store.zero_grad();
    const auto loss = training::nmse_batch<double>(m.forward(b), truth, 1, L);
    m.backward(loss.grad);
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& t = store[i];
        if (!include(t.name))
            continue;
        const Eigen::Index n = t.value.size();
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(idx.size(), 6));
        double num = 0.0, ga = 0.0, fa = 0.0;
        for (auto j : idx) {
            const double v0 = t.value.data()[j];
            t.value.data()[j] = v0 + h;
            const double lp = loss_of(m, b, truth, L);
            t.value.data()[j] = v0 - h;
            const double lm = loss_of(m, b, truth, L);
            t.value.data()[j] = v0;
            double fd = (lp - lm) / (2 * h);
            // a ReLU kink within h of the point skews the difference; the
            // estimate then moves with the step by more than rounding noise,
            // so retry at h/10
            if (std::abs(t.grad.data()[j] - fd) > 1e-6 * std::max(std::abs(fd), 1e-9)) {
                t.value.data()[j] = v0 + 0.1 * h;
                const double sp = loss_of(m, b, truth, L);
                t.value.data()[j] = v0 - 0.1 * h;
                const double sm = loss_of(m, b, truth, L);
                t.value.data()[j] = v0;
                const double fd_small = (sp - sm) / (0.2 * h);
                const double noise = 64 * std::numeric_limits<double>::epsilon() * std::abs(sp + sm) / (0.2 * h);
                if (std::abs(fd_small - fd) > std::max(1e-4 * std::abs(fd_small), noise))
                    fd = fd_small;
            }
            const double g = t.grad.data()[j];
            num += (g - fd) * (g - fd);
            ga += g * g;
            fa += fd * fd;
        }
        const double den = std::sqrt(std::max(ga, fa));
        if (den < 1e-9)
            continue;
        const double rel = std::sqrt(num) / den;
        if (rel > worst) {
            worst = rel;
            worst_name = t.name;
        }
    }
    return {worst, worst_name};
}

} // namespace llm4cp::test_support

#endif
