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

#ifndef LLM4CP_NN_PARAM_STORE_HPP
#define LLM4CP_NN_PARAM_STORE_HPP

#include "../common.hpp"

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace llm4cp::nn {

template <class T>
struct Tensor {
    std::string name;
    Mat<T> value;
    Mat<T> grad;
    bool trainable = true;
    bool force_grad = false; // accumulate gradients even while frozen (gradient checks)

    bool wants_grad() const { return trainable || force_grad; }
    Eigen::Index size() const { return value.size(); }
};

struct ParamCounts {
    std::size_t trainable = 0;
    std::size_t total = 0;
};

// Per tensor-name trainable flag.
using FreezeMask = std::map<std::string, bool>;

// Named-tensor store. Tensors live behind stable pointers, so layers may
// hold raw pointers into the store for its whole lifetime.
template <class T>
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    Tensor<T>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool trainable = true)
    {
        if (index_.count(name))
            throw std::invalid_argument("duplicate tensor name '" + name + "'");
        auto t = std::make_unique<Tensor<T>>();
        t->name = name;
        t->value = Mat<T>::Zero(rows, cols);
        t->grad = Mat<T>::Zero(rows, cols);
        t->trainable = trainable;
        index_[name] = tensors_.size();
        tensors_.push_back(std::move(t));
        return *tensors_.back();
    }

    Tensor<T>* find(const std::string& name)
    {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : tensors_[it->second].get();
    }
    const Tensor<T>* find(const std::string& name) const
    {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : tensors_[it->second].get();
    }
    Tensor<T>& at(const std::string& name)
    {
        auto* t = find(name);
        if (!t)
            throw std::out_of_range("no tensor named '" + name + "'");
        return *t;
    }
    const Tensor<T>& at(const std::string& name) const
    {
        const auto* t = find(name);
        if (!t)
            throw std::out_of_range("no tensor named '" + name + "'");
        return *t;
    }

    std::size_t size() const { return tensors_.size(); }
    Tensor<T>& operator[](std::size_t i) { return *tensors_[i]; }
    const Tensor<T>& operator[](std::size_t i) const { return *tensors_[i]; }

    void zero_grad()
    {
        for (auto& t : tensors_)
            t->grad.setZero();
    }

    void force_all_grads(bool on)
    {
        for (auto& t : tensors_)
            t->force_grad = on;
    }

    ParamCounts counts() const
    {
        ParamCounts c;
        for (const auto& t : tensors_) {
            const auto n = static_cast<std::size_t>(t->size());
            c.total += n;
            if (t->trainable)
                c.trainable += n;
        }
        return c;
    }

    FreezeMask mask() const
    {
        FreezeMask m;
        for (const auto& t : tensors_)
            m[t->name] = t->trainable;
        return m;
    }

    std::vector<Mat<T>> snapshot() const
    {
        std::vector<Mat<T>> s;
        s.reserve(tensors_.size());
        for (const auto& t : tensors_)
            s.push_back(t->value);
        return s;
    }

    void restore(const std::vector<Mat<T>>& s)
    {
        if (s.size() != tensors_.size())
            throw std::invalid_argument("snapshot does not match parameter store");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i].rows() != tensors_[i]->value.rows() || s[i].cols() != tensors_[i]->value.cols())
                throw std::invalid_argument("snapshot shape mismatch for '" + tensors_[i]->name + "'");
            tensors_[i]->value = s[i];
        }
    }

    void copy_values_from(const ParamStore& other)
    {
        for (const auto& t : other.tensors_)
            at(t->name).value = t->value;
    }

private:
    std::vector<std::unique_ptr<Tensor<T>>> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Sets every tensor's trainable flag from the mask. Every tensor must be
// covered; names in the mask that do not exist are an error too.
template <class T>
void apply_freeze(ParamStore<T>& store, const FreezeMask& mask)
{
    for (std::size_t i = 0; i < store.size(); ++i)
        if (!mask.count(store[i].name))
            throw std::invalid_argument("freeze mask does not cover tensor '" + store[i].name + "'");
    for (const auto& [name, trainable] : mask)
        store.at(name).trainable = trainable;
}

template <class T>
ParamCounts count_params(const ParamStore<T>& store, const FreezeMask& mask)
{
    ParamCounts c;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto it = mask.find(store[i].name);
        if (it == mask.end())
            throw std::invalid_argument("freeze mask does not cover tensor '" + store[i].name + "'");
        const auto n = static_cast<std::size_t>(store[i].size());
        c.total += n;
        if (it->second)
            c.trainable += n;
    }
    return c;
}

template <class T>
void init_normal(Tensor<T>& t, double stddev, Rng& rng)
{
    std::normal_distribution<double> d(0.0, stddev);
    for (Eigen::Index i = 0; i < t.value.size(); ++i)
        t.value.data()[i] = static_cast<T>(d(rng));
}

template <class T>
void init_uniform(Tensor<T>& t, double bound, Rng& rng)
{
    std::uniform_real_distribution<double> d(-bound, bound);
    for (Eigen::Index i = 0; i < t.value.size(); ++i)
        t.value.data()[i] = static_cast<T>(d(rng));
}

} // namespace llm4cp::nn

#endif
