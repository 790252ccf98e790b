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

#ifndef LLM4CP_CONFIG_HPP
#define LLM4CP_CONFIG_HPP

#include "chansim.hpp"
#include "evaluation.hpp"
#include "predictors.hpp"
#include "training.hpp"

#include <fstream>
#include <sstream>

// Run configuration files: one `key = value` per line, `#` starts a
// comment, blank lines are ignored, a key may appear once per file. Lists
// are comma separated. Command-line flags are applied after the file.

namespace llm4cp::config {

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline KeyValues parse_text(const std::string& text, const std::string& origin = "<config>")
{
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (const auto h = line.find('#'); h != std::string::npos)
            line.resize(h);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    }
    return kv;
}

inline KeyValues load_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
    }
}

inline long long to_int(const std::string& key, const std::string& v)
{
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 9.0e15)
        throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
    return static_cast<long long>(d);
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

struct KeyDoc {
    const char* key;
    const char* doc;
};

inline const std::vector<KeyDoc>& documented_keys()
{
    static const std::vector<KeyDoc> keys = {
        {"desk_scale", "reduced grid, counts and model widths for single-core runs (true/false)"},
        {"seed", "master seed; every random stream is derived from it"},
        {"out", "output root; data/, checkpoints/ and reports/ live below it"},
        {"data", "dataset directory (default <out>/data)"},
        {"checkpoints", "checkpoint directory (default <out>/checkpoints)"},
        {"scenario", "channel preset: uma, umi or desk"},
        {"duplex", "tdd or fdd"},
        {"carrier_ghz", "uplink center frequency in GHz; antenna spacing follows at half a wavelength"},
        {"num_rb", "resource blocks K (bandwidth follows at 180 kHz each)"},
        {"history", "history length P"},
        {"horizon", "prediction horizon L"},
        {"velocity_min_kmh", "lower speed bound of the training and validation sets"},
        {"velocity_max_kmh", "upper speed bound of the training and validation sets"},
        {"train_samples", "training set size"},
        {"val_samples", "validation set size"},
        {"test_samples", "test samples per velocity"},
        {"test_velocities_kmh", "list of test velocities"},
        {"predictor", "list of predictors: llm4cp, no_prediction, pad, rnn, lstm, gru, cnn, transformer"},
        {"suite", "list of suites: velocity_sweep, noise_sweep, few_shot, cross_scenario, cross_frequency"},
        {"weights", "pretrained backbone archive for llm4cp (empty: random init)"},
        {"batch", "training batch size"},
        {"epochs", "training epochs"},
        {"lr", "initial learning rate"},
        {"lr_decay", "learning rate factor applied every lr_decay_every epochs"},
        {"lr_decay_every", "epochs between learning rate decays"},
        {"noise_augment", "train on histories with random SNR in [noise_lo_db, noise_hi_db]"},
        {"noise_lo_db", "lower history SNR for noise augmentation"},
        {"noise_hi_db", "upper history SNR for noise augmentation"},
        {"few_shot_frac", "fraction of the training set used by train"},
        {"few_shot_fracs", "list of fractions evaluated by the few_shot suite"},
        {"shots", "list of fine-tuning sample counts for the cross suites (0 = zero-shot)"},
        {"noise_snrs_db", "list of history SNRs for the noise_sweep suite"},
        {"snr", "communication SNR in dB for SE and BER"},
        {"ber_symbols", "4-QAM symbols per subcarrier for BER"},
        {"ber_samples", "samples per condition that get a BER run"},
        {"timing", "also run the per-batch timing probe during evaluate"},
        {"model.features", "llm4cp feature width F"},
        {"model.layers", "llm4cp backbone layers"},
        {"model.heads", "llm4cp attention heads"},
        {"model.patch", "llm4cp patch length N"},
        {"model.hidden", "recurrent hidden size"},
        {"model.channels", "cnn channels"},
        {"model.d_model", "transformer width"},
    };
    return keys;
}

struct RunConfig {
    bool desk_scale = false;
    std::uint64_t seed = 2024;
    std::string out = "run";
    std::string data, checkpoints;

    chansim::ScenarioConfig scenario;
    std::string scenario_name = "uma";
    std::size_t train_samples = 8000, val_samples = 1000, test_samples = 1000;
    std::vector<double> test_velocities_kmh;

    std::vector<std::string> predictors = {"llm4cp"};
    std::vector<eval::Suite> suites = {eval::Suite::VelocitySweep};
    std::string weights;

    training::TrainConfig train;
    std::vector<double> few_shot_fracs = {0.1, 1.0};
    std::vector<int> shots = {0};
    std::vector<double> noise_snrs_db = eval::noise_grid();
    eval::LinkConfig link;
    bool timing = false;

    std::map<std::string, int> model_overrides;

    std::string data_dir() const { return data.empty() ? out + "/data" : data; }
    std::string checkpoint_dir() const { return checkpoints.empty() ? out + "/checkpoints" : checkpoints; }
    std::string report_dir() const { return out + "/reports"; }

    void validate() const
    {
        scenario.validate();
        train.validate();
        link.validate();
        if (train_samples == 0 || val_samples == 0 || test_samples == 0)
            throw ConfigError("sample counts must be positive");
        if (test_velocities_kmh.empty())
            throw ConfigError("test_velocities_kmh must not be empty");
        if (predictors.empty())
            throw ConfigError("no predictor selected");
        for (const auto& p : predictors)
            make_spec(p, scenario.num_rb, scenario.history, scenario.horizon, desk_scale);
        for (double f : few_shot_fracs)
            if (!(f > 0.0 && f <= 1.0))
                throw ConfigError("few_shot_fracs must lie in (0, 1]");
        for (int s : shots)
            if (s < 0)
                throw ConfigError("shots must be >= 0");
    }

    // Hyperparameters of one predictor on this run's grid, overrides applied.
    PredictorSpec spec(const std::string& kind) const
    {
        auto s = make_spec(kind, scenario.num_rb, scenario.history, scenario.horizon, desk_scale);
        const auto ov = [&](const char* k, int& field) {
            if (auto it = model_overrides.find(k); it != model_overrides.end())
                field = it->second;
        };
        if (auto* m = std::get_if<ModelConfig>(&s.params)) {
            ov("model.features", m->F);
            ov("model.layers", m->layers);
            ov("model.heads", m->heads);
            ov("model.patch", m->N);
            m->validate();
        } else if (auto* r = std::get_if<baselines::RecurrentConfig>(&s.params)) {
            ov("model.hidden", r->hidden);
        } else if (auto* c = std::get_if<baselines::CnnConfig>(&s.params)) {
            ov("model.channels", c->channels);
        } else if (auto* t = std::get_if<baselines::TransformerConfig>(&s.params)) {
            ov("model.d_model", t->d_model);
            t->validate();
        }
        return s;
    }

    // Canonical text of every effective setting; hashed into all outputs.
    std::string canonical() const
    {
        std::ostringstream os;
        os.precision(17);
        const auto list = [](const auto& v) {
            std::ostringstream s;
            s.precision(17);
            for (std::size_t i = 0; i < v.size(); ++i)
                s << (i ? "," : "") << v[i];
            return s.str();
        };
        std::vector<std::string> suite_names;
        for (auto s : suites)
            suite_names.push_back(eval::to_string(s));
        const auto& sc = scenario;
        os << "desk_scale=" << desk_scale << "\nseed=" << seed << "\nscenario=" << scenario_name
           << "\nduplex=" << chansim::to_string(sc.duplex) << "\ncarrier_hz=" << sc.uplink_center_hz
           << "\nnum_rb=" << sc.num_rb << "\nhistory=" << sc.history << "\nhorizon=" << sc.horizon
           << "\nvelocity_mps=" << sc.velocity_min_mps << "," << sc.velocity_max_mps
           << "\nsamples=" << train_samples << "," << val_samples << "," << test_samples
           << "\ntest_velocities_kmh=" << list(test_velocities_kmh) << "\npredictor=" << list(predictors)
           << "\nsuite=" << list(suite_names) << "\nweights=" << weights << "\nbatch=" << train.batch
           << "\nepochs=" << train.epochs << "\nlr=" << train.lr0 << "," << train.decay << "," << train.decay_every
           << "\nnoise=" << (train.noise ? list(std::vector<double>{train.noise->lo_db, train.noise->hi_db}) : "off")
           << "\nfew_shot_frac=" << train.few_shot << "\nfew_shot_fracs=" << list(few_shot_fracs)
           << "\nshots=" << list(shots) << "\nnoise_snrs_db=" << list(noise_snrs_db) << "\nsnr=" << link.snr_db
           << "\nber=" << link.symbols << "," << link.ber_samples << '\n';
        for (const auto& [k, v] : model_overrides)
            os << k << '=' << v << '\n';
        return os.str();
    }

    std::uint64_t hash() const
    {
        const auto s = canonical();
        return fnv1a(s.data(), s.size());
    }
};

// Defaults for full-size or desk-scale runs, before any key is applied.
inline RunConfig defaults(bool desk)
{
    RunConfig c;
    c.desk_scale = desk;
    if (desk) {
        c.scenario_name = "desk";
        c.scenario = chansim::scenario_preset("desk");
        c.train_samples = 2000;
        c.val_samples = 500;
        c.test_samples = 500;
        c.train.batch = 64;
        c.train.epochs = 100;
        c.train.decay_every = 40;
        c.link.ber_samples = 10;
    } else {
        c.scenario = chansim::scenario_preset("uma");
    }
    c.test_velocities_kmh = eval::velocity_grid(desk);
    return c;
}

// Builds the effective configuration: defaults for the chosen scale, then
// file keys, then flag keys (flags win).
inline RunConfig resolve(const KeyValues& file, const KeyValues& flags)
{
    KeyValues kv = file;
    for (const auto& [k, v] : flags)
        kv[k] = v;
    bool desk = false;
    if (auto it = kv.find("desk_scale"); it != kv.end())
        desk = to_bool("desk_scale", it->second);
    RunConfig c = defaults(desk);

    // scenario first: the preset resets the grid that later keys refine
    if (auto it = kv.find("scenario"); it != kv.end()) {
        c.scenario_name = it->second;
        c.scenario = chansim::scenario_preset(it->second);
    }
    bool have_noise_flag = false;
    for (const auto& [k, v] : kv) {
        auto& sc = c.scenario;
        if (k == "desk_scale" || k == "scenario") {
        } else if (k == "seed") {
            c.seed = static_cast<std::uint64_t>(to_int(k, v));
        } else if (k == "out") {
            c.out = v;
        } else if (k == "data") {
            c.data = v;
        } else if (k == "checkpoints") {
            c.checkpoints = v;
        } else if (k == "duplex") {
            sc.duplex = chansim::parse_duplex(v);
        } else if (k == "carrier_ghz") {
            sc.uplink_center_hz = to_double(k, v) * 1e9;
            sc.geometry.d_h = sc.geometry.d_v = kSpeedOfLight / sc.uplink_center_hz / 2.0;
        } else if (k == "num_rb") {
            sc.num_rb = static_cast<int>(to_int(k, v));
            sc.bandwidth_hz = sc.num_rb * sc.pilot_spacing_hz;
        } else if (k == "history") {
            sc.history = static_cast<int>(to_int(k, v));
        } else if (k == "horizon") {
            sc.horizon = static_cast<int>(to_int(k, v));
        } else if (k == "velocity_min_kmh") {
            sc.velocity_min_mps = to_double(k, v) / 3.6;
        } else if (k == "velocity_max_kmh") {
            sc.velocity_max_mps = to_double(k, v) / 3.6;
        } else if (k == "train_samples") {
            c.train_samples = static_cast<std::size_t>(to_int(k, v));
        } else if (k == "val_samples") {
            c.val_samples = static_cast<std::size_t>(to_int(k, v));
        } else if (k == "test_samples") {
            c.test_samples = static_cast<std::size_t>(to_int(k, v));
        } else if (k == "test_velocities_kmh") {
            c.test_velocities_kmh.clear();
            for (const auto& s : split_list(v))
                c.test_velocities_kmh.push_back(to_double(k, s));
        } else if (k == "predictor") {
            c.predictors = split_list(v);
        } else if (k == "suite") {
            c.suites.clear();
            for (const auto& s : split_list(v))
                c.suites.push_back(eval::parse_suite(s));
        } else if (k == "weights") {
            c.weights = v;
        } else if (k == "batch") {
            c.train.batch = static_cast<int>(to_int(k, v));
        } else if (k == "epochs") {
            c.train.epochs = static_cast<int>(to_int(k, v));
        } else if (k == "lr") {
            c.train.lr0 = to_double(k, v);
        } else if (k == "lr_decay") {
            c.train.decay = to_double(k, v);
        } else if (k == "lr_decay_every") {
            c.train.decay_every = static_cast<int>(to_int(k, v));
        } else if (k == "noise_augment") {
            have_noise_flag = to_bool(k, v);
        } else if (k == "noise_lo_db" || k == "noise_hi_db") {
            to_double(k, v);
        } else if (k == "few_shot_frac") {
            c.train.few_shot = to_double(k, v);
        } else if (k == "few_shot_fracs") {
            c.few_shot_fracs.clear();
            for (const auto& s : split_list(v))
                c.few_shot_fracs.push_back(to_double(k, s));
        } else if (k == "shots") {
            c.shots.clear();
            for (const auto& s : split_list(v))
                c.shots.push_back(static_cast<int>(to_int(k, s)));
        } else if (k == "noise_snrs_db") {
            c.noise_snrs_db.clear();
            for (const auto& s : split_list(v))
                c.noise_snrs_db.push_back(to_double(k, s));
        } else if (k == "snr") {
            c.link.snr_db = to_double(k, v);
        } else if (k == "ber_symbols") {
            c.link.symbols = static_cast<int>(to_int(k, v));
        } else if (k == "ber_samples") {
            c.link.ber_samples = static_cast<int>(to_int(k, v));
        } else if (k == "timing") {
            c.timing = to_bool(k, v);
        } else if (k.rfind("model.", 0) == 0) {
            const bool known = std::any_of(documented_keys().begin(), documented_keys().end(),
                                           [&](const KeyDoc& d) { return k == d.key; });
            if (!known)
                throw ConfigError("unknown config key '" + k + "'");
            c.model_overrides[k] = static_cast<int>(to_int(k, v));
        } else {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    if (have_noise_flag) {
        training::NoiseRange r;
        if (auto it = kv.find("noise_lo_db"); it != kv.end())
            r.lo_db = to_double(it->first, it->second);
        if (auto it = kv.find("noise_hi_db"); it != kv.end())
            r.hi_db = to_double(it->first, it->second);
        c.train.noise = r;
    }
    c.train.seed = c.seed;
    c.scenario.seed = c.seed;
    c.validate();
    return c;
}

} // namespace llm4cp::config

#endif
