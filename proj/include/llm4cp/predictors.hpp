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

#ifndef LLM4CP_PREDICTORS_HPP
#define LLM4CP_PREDICTORS_HPP

#include "baselines/classic.hpp"
#include "baselines/cnn.hpp"
#include "baselines/recurrent.hpp"
#include "baselines/transformer.hpp"
#include "model.hpp"

#include <array>
#include <optional>
#include <variant>

namespace llm4cp {

struct NoPredictionConfig {};

using PredictorParams = std::variant<NoPredictionConfig, baselines::PadConfig, ModelConfig, baselines::RecurrentConfig,
                                     baselines::CnnConfig, baselines::TransformerConfig>;

// A predictor kind plus its hyperparameters.
struct PredictorSpec {
    std::string kind;
    PredictorParams params;

    bool trainable() const
    {
        return !std::holds_alternative<NoPredictionConfig>(params) && !std::holds_alternative<baselines::PadConfig>(params);
    }
};

inline const std::vector<std::string>& predictor_kinds()
{
    static const std::vector<std::string> kinds = {"llm4cp", "no_prediction", "pad", "rnn", "lstm", "gru", "cnn", "transformer"};
    return kinds;
}

// Default hyperparameters for the grid (K, P, L). `desk` selects the
// reduced widths used for single-core runs.
inline PredictorSpec make_spec(const std::string& kind, int K, int P, int L, bool desk = false)
{
    PredictorSpec s;
    s.kind = kind;
    if (kind == "no_prediction") {
        s.params = NoPredictionConfig{};
    } else if (kind == "pad") {
        s.params = baselines::PadConfig{};
    } else if (kind == "llm4cp") {
        ModelConfig m;
        m.K = K;
        m.P = P;
        m.L = L;
        if (desk) {
            m.F = 128;
            m.layers = 2;
            m.heads = 4;
        }
        s.params = m;
    } else if (kind == "rnn" || kind == "lstm" || kind == "gru") {
        baselines::RecurrentConfig r;
        r.cell = kind == "rnn" ? baselines::Cell::RNN : kind == "lstm" ? baselines::Cell::LSTM : baselines::Cell::GRU;
        r.hidden = desk ? 64 : baselines::RecurrentConfig::default_hidden(r.cell);
        r.K = K;
        r.P = P;
        r.L = L;
        s.params = r;
    } else if (kind == "cnn") {
        baselines::CnnConfig c;
        c.channels = desk ? 32 : 208;
        c.K = K;
        c.P = P;
        c.L = L;
        s.params = c;
    } else if (kind == "transformer") {
        baselines::TransformerConfig t;
        if (desk) {
            t.d_model = 64;
            t.heads = 4;
            t.ffn = 256;
        }
        t.K = K;
        t.P = P;
        t.L = L;
        s.params = t;
    } else {
        throw ConfigError("unknown predictor '" + kind + "'");
    }
    return s;
}

template <class T>
std::shared_ptr<SequenceModel<T>> make_model(const PredictorSpec& spec, std::uint64_t seed)
{
    return std::visit(
        [&](const auto& p) -> std::shared_ptr<SequenceModel<T>> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ModelConfig>) {
                auto m = std::make_shared<Llm4cpModel<T>>(p);
                m->init(seed);
                return m;
            } else if constexpr (std::is_same_v<P, baselines::RecurrentConfig>) {
                auto m = std::make_shared<baselines::RecurrentModel<T>>(p);
                m->init(seed);
                return m;
            } else if constexpr (std::is_same_v<P, baselines::CnnConfig>) {
                auto m = std::make_shared<baselines::CnnModel<T>>(p);
                m->init(seed);
                return m;
            } else if constexpr (std::is_same_v<P, baselines::TransformerConfig>) {
                auto m = std::make_shared<baselines::TransformerModel<T>>(p);
                m->init(seed);
                return m;
            } else {
                throw ConfigError("predictor '" + spec.kind + "' has no trainable model");
            }
        },
        spec.params);
}

// Rebuilds the hyperparameters a model archive was written with.
inline PredictorSpec spec_from_archive(const std::string& kind, const WeightArchive& a)
{
    const auto get = [&](const std::string& k) { return static_cast<int>(a.get_scalar("config." + k)); };
    PredictorSpec s;
    s.kind = kind;
    if (kind == "llm4cp") {
        s.params = Llm4cpModel<float>::read_config(a);
    } else if (kind == "rnn" || kind == "lstm" || kind == "gru") {
        baselines::RecurrentConfig r;
        r.cell = static_cast<baselines::Cell>(get("cell"));
        if (baselines::to_string(r.cell) != kind)
            throw ConfigError("archive holds a " + baselines::to_string(r.cell) + " model, expected " + kind);
        r.layers = get("layers");
        r.hidden = get("hidden");
        r.K = get("K");
        r.P = get("P");
        r.L = get("L");
        s.params = r;
    } else if (kind == "cnn") {
        baselines::CnnConfig c;
        c.layers = get("layers");
        c.channels = get("channels");
        c.K = get("K");
        c.P = get("P");
        c.L = get("L");
        s.params = c;
    } else if (kind == "transformer") {
        baselines::TransformerConfig t;
        t.d_model = get("d_model");
        t.heads = get("heads");
        t.encoder_layers = get("encoder_layers");
        t.ffn = get("ffn");
        t.K = get("K");
        t.P = get("P");
        t.L = get("L");
        t.positional = !a.contains("config.positional") || get("positional") != 0;
        s.params = t;
    } else {
        throw ConfigError("predictor '" + kind + "' has no trainable model");
    }
    return s;
}

// Grid (K, P, L) a spec was built for; fixed predictors accept any grid.
inline std::optional<std::array<int, 3>> spec_grid(const PredictorSpec& spec)
{
    return std::visit(
        [](const auto& p) -> std::optional<std::array<int, 3>> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, NoPredictionConfig> || std::is_same_v<P, baselines::PadConfig>)
                return std::nullopt;
            else
                return std::array<int, 3>{p.K, p.P, p.L};
        },
        spec.params);
}

inline std::unique_ptr<Predictor> make_fixed_predictor(const PredictorSpec& spec)
{
    if (const auto* pad = std::get_if<baselines::PadConfig>(&spec.params))
        return std::make_unique<baselines::PadPredictor>(*pad);
    if (std::holds_alternative<NoPredictionConfig>(spec.params))
        return std::make_unique<baselines::NoPrediction>();
    throw ConfigError("predictor '" + spec.kind + "' needs trained weights");
}

} // namespace llm4cp

#endif
