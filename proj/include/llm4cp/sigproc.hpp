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

#ifndef LLM4CP_SIGPROC_HPP
#define LLM4CP_SIGPROC_HPP

#include "common.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace llm4cp::sigproc {

// Unitary K-point DFT matrix, F[k][m] = exp(-j 2 pi k m / K) / sqrt(K).
inline CMat dft_matrix(int n)
{
    if (n < 1)
        throw std::invalid_argument("dft_matrix: size must be positive");
    CMat F(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
            // reduce k*m mod n first so large products keep full precision
            const auto km = static_cast<double>((static_cast<long long>(k) * m) % n);
            F(k, m) = std::polar(scale, -2.0 * kPi * km / n);
        }
    return F;
}

// Frequency -> delay domain along rows: H_tau = F^H H_f.
inline CMat idft_delay(const CMat& freq)
{
    return dft_matrix(static_cast<int>(freq.rows())).adjoint() * freq;
}

inline CMat dft_freq(const CMat& delay)
{
    return dft_matrix(static_cast<int>(delay.rows())) * delay;
}

// [K][P] complex -> [2K][P] real, real parts in rows 0..K-1 and imaginary
// parts in rows K..2K-1 (the two channels of the [2][K][P] layout, merged).
template <class T = double>
Mat<T> realify(const CMat& h)
{
    const auto K = h.rows();
    Mat<T> x(2 * K, h.cols());
    x.topRows(K) = h.real().cast<T>();
    x.bottomRows(K) = h.imag().cast<T>();
    return x;
}

template <class T>
CMat complexify(const Mat<T>& x)
{
    if (x.rows() % 2 != 0)
        throw std::invalid_argument("complexify: row count must be even");
    const auto K = x.rows() / 2;
    CMat h(K, x.cols());
    h.real() = x.topRows(K).template cast<double>();
    h.imag() = x.bottomRows(K).template cast<double>();
    return h;
}

struct NormStats {
    static constexpr double kStdFloor = 1e-9;
    double mean = 0.0;
    double std = 1.0;
};

// Population mean / std over every entry. A std below the floor is clamped.
template <class Derived>
NormStats compute_stats(const Eigen::MatrixBase<Derived>& x)
{
    NormStats s;
    const auto n = static_cast<double>(x.size());
    s.mean = static_cast<double>(x.sum()) / n;
    // Summation rounding would otherwise leave a constant input slightly off zero.
    if (x.size() > 0 && x.maxCoeff() == x.minCoeff())
        s.mean = static_cast<double>(x(0, 0));
    double var = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double d = static_cast<double>(x(i, j)) - s.mean;
            var += d * d;
        }
    s.std = std::sqrt(var / n);
    if (!(s.std >= NormStats::kStdFloor)) {
        s.std = NormStats::kStdFloor;
    }
    return s;
}

template <class T>
Mat<T> normalize(const Mat<T>& x, NormStats stats)
{
    if (!(stats.std > 0.0))
        throw std::invalid_argument("normalize: std must be positive");
    if (stats.std < NormStats::kStdFloor) {
        std::clog << "[sigproc] std " << stats.std << " below floor, clamped to " << NormStats::kStdFloor << '\n';
        stats.std = NormStats::kStdFloor;
    }
    return ((x.array() - static_cast<T>(stats.mean)) / static_cast<T>(stats.std)).matrix();
}

template <class T>
Mat<T> denormalize(const Mat<T>& x, NormStats stats)
{
    return (x.array() * static_cast<T>(stats.std) + static_cast<T>(stats.mean)).matrix();
}

inline int num_patches(int length, int patch) { return (length + patch - 1) / patch; }

// [R][P] -> [R][N][P'] stored as a (R*N) x P' matrix: column j is patch j,
// element (r, n) at row r*N + n, holding x(r, j*N + n) or zero past P.
template <class T>
struct PatchedTensor {
    Mat<T> data;
    int rows = 0;  // R (2K for a realified channel)
    int patch = 1; // N
    int length = 0; // original P

    int patches() const { return static_cast<int>(data.cols()); }
    T operator()(int r, int n, int j) const { return data(r * patch + n, j); }
};

template <class T>
PatchedTensor<T> patch(const Mat<T>& x, int n)
{
    if (n < 1)
        throw std::invalid_argument("patch: patch size must be >= 1");
    PatchedTensor<T> out;
    out.rows = static_cast<int>(x.rows());
    out.patch = n;
    out.length = static_cast<int>(x.cols());
    const int np = num_patches(out.length, n);
    out.data = Mat<T>::Zero(out.rows * n, np);
    for (int r = 0; r < out.rows; ++r)
        for (int t = 0; t < out.length; ++t)
            out.data(r * n + t % n, t / n) = x(r, t);
    return out;
}

template <class T>
Mat<T> unpatch(const PatchedTensor<T>& p)
{
    Mat<T> x(p.rows, p.length);
    for (int r = 0; r < p.rows; ++r)
        for (int t = 0; t < p.length; ++t)
            x(r, t) = p.data(r * p.patch + t % p.patch, t / p.patch);
    return x;
}

} // namespace llm4cp::sigproc

#endif
