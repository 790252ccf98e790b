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

#ifndef LLM4CP_EVALUATION_HPP
#define LLM4CP_EVALUATION_HPP

#include "dataset_io.hpp"
#include "nn/layers.hpp"
#include "predictor.hpp"
#include "training.hpp"

#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

namespace llm4cp::eval {

// sum ||pred - truth||^2 / sum ||truth||^2 over all steps of one sample.
inline double nmse_metric(const chansim::CsiTensor& pred, const chansim::CsiTensor& truth)
{
    if (pred.steps != truth.steps || pred.subcarriers != truth.subcarriers || pred.antennas != truth.antennas)
        throw std::invalid_argument("nmse_metric: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        num += std::norm(cf64(pred.data[i]) - cf64(truth.data[i]));
        den += std::norm(cf64(truth.data[i]));
    }
    if (!(den > 0.0))
        throw std::invalid_argument("nmse_metric: truth has zero energy");
    return num / den;
}

inline double to_db(double x) { return 10.0 * std::log10(x); }

inline CVec matched_precoder(const CVec& h)
{
    const double n = h.norm();
    if (!(n > 0.0))
        throw std::invalid_argument("matched_precoder: zero channel");
    return h / n;
}

inline constexpr int kMinBerSymbols = 10000;

struct LinkConfig {
    double snr_db = 10.0;
    int symbols = 10000;    // per subcarrier, for BER
    int ber_samples = 20;   // samples per condition that get a BER run
    int ber_step = 0;       // predicted step used for SE/BER

    void validate() const
    {
        if (!std::isfinite(snr_db))
            throw ConfigError("link: SNR must be finite");
        if (symbols < 1 || ber_samples < 0 || ber_step < 0)
            throw ConfigError("link: symbol and sample counts must be positive");
        if (ber_samples > 0 && symbols < kMinBerSymbols)
            throw ConfigError("link: BER runs need at least 10000 symbols per subcarrier");
    }
};

// One time step of a tensor as a K x Nt matrix.
inline CMat csi_slice(const chansim::CsiTensor& t, int step)
{
    CMat h(t.subcarriers, t.antennas);
    for (int k = 0; k < t.subcarriers; ++k)
        for (int n = 0; n < t.antennas; ++n)
            h(k, n) = cf64(t(step, k, n));
    return h;
}

// Effective scalar channel h_k^H w_k, w_k matched to the predicted channel
// (Eigen dot conjugates its left operand).
inline CVec effective_gains(const CMat& truth, const CMat& pred)
{
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        throw std::invalid_argument("effective_gains: shape mismatch");
    CVec g(truth.rows());
    for (Eigen::Index k = 0; k < truth.rows(); ++k) {
        const CVec hp = pred.row(k).transpose();
        g(k) = hp.norm() > 0.0 ? CVec(truth.row(k).transpose()).dot(matched_precoder(hp)) : cf64(0.0);
    }
    return g;
}

// Per-subcarrier mean of log2(1 + |h^H w|^2 * SNR).
inline double spectral_efficiency(const CMat& truth, const CMat& pred, const LinkConfig& link)
{
    const double snr = db_to_linear(link.snr_db);
    const CVec g = effective_gains(truth, pred);
    double se = 0.0;
    for (Eigen::Index k = 0; k < g.size(); ++k)
        se += std::log2(1.0 + std::norm(g(k)) * snr);
    return se / static_cast<double>(g.size());
}

struct BerCount {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
    double rate() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

// Gray-mapped 4-QAM through y = g x + n with unit symbol energy and noise
// variance 1/SNR; the receiver knows g and equalizes before slicing. When
// g is zero it slices y itself.
inline BerCount ber_4qam_gains(const CVec& gains, double snr_db, int symbols, Rng& rng)
{
    const double sigma = std::sqrt(1.0 / db_to_linear(snr_db) / 2.0);
    std::normal_distribution<double> noise(0.0, sigma);
    std::bernoulli_distribution bit(0.5);
    const double a = 1.0 / std::sqrt(2.0);
    BerCount c;
    for (Eigen::Index k = 0; k < gains.size(); ++k) {
        const cf64 g = gains(k);
        const bool coherent = std::norm(g) > 0.0;
        for (int s = 0; s < symbols; ++s) {
            const bool b0 = bit(rng), b1 = bit(rng);
            const cf64 x(b0 ? -a : a, b1 ? -a : a);
            const cf64 y = g * x + cf64(noise(rng), noise(rng));
            const cf64 z = coherent ? y * std::conj(g) : y;
            c.errors += static_cast<std::uint64_t>((z.real() < 0.0) != b0) + static_cast<std::uint64_t>((z.imag() < 0.0) != b1);
            c.bits += 2;
        }
    }
    return c;
}

inline double ber_4qam(const CMat& truth, const CMat& pred, const LinkConfig& link, Rng& rng)
{
    if (link.symbols < kMinBerSymbols)
        throw ConfigError("ber_4qam: needs at least 10000 symbols per subcarrier");
    return ber_4qam_gains(effective_gains(truth, pred), link.snr_db, link.symbols, rng).rate();
}

// Closed-form bit error probability of Gray 4-QAM at effective SNR gamma.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }
inline double ber_4qam_theory(double gamma) { return q_function(std::sqrt(gamma)); }

enum class Suite { VelocitySweep, NoiseSweep, FewShot, CrossScenario, CrossFrequency };

inline std::string to_string(Suite s)
{
    switch (s) {
    case Suite::VelocitySweep:
        return "velocity_sweep";
    case Suite::NoiseSweep:
        return "noise_sweep";
    case Suite::FewShot:
        return "few_shot";
    case Suite::CrossScenario:
        return "cross_scenario";
    case Suite::CrossFrequency:
        return "cross_frequency";
    }
    return "?";
}

inline Suite parse_suite(const std::string& s)
{
    for (auto v : {Suite::VelocitySweep, Suite::NoiseSweep, Suite::FewShot, Suite::CrossScenario, Suite::CrossFrequency})
        if (to_string(v) == s)
            return v;
    throw ConfigError("unknown suite '" + s + "'");
}

// One test condition: a dataset plus an optional history SNR.
struct Condition {
    std::string label;
    double x = 0.0; // velocity km/h, SNR dB, fraction, shots ... depending on the suite
    const chansim::Dataset* data = nullptr;
    double history_snr_db = std::numeric_limits<double>::infinity();
};

struct NamedPredictor {
    std::string label;
    Predictor* predictor = nullptr; // nullptr: checkpoint missing, rows marked absent
};

struct ReportRow {
    std::string suite, predictor, condition;
    double x = 0.0;
    bool absent = false;
    double nmse = 0.0, nmse_db = 0.0, se = 0.0, se_perfect = 0.0, ber = 0.0;
    std::size_t samples = 0;
    std::string dataset_hash;
    std::uint64_t seed = 0;
};

struct TimingRow {
    std::string predictor;
    double train_ms = 0.0;
    double infer_ms = 0.0;
    int batch = 0;
};

struct EvalReport {
    std::vector<ReportRow> rows;
    std::map<std::string, std::pair<std::size_t, std::size_t>> params; // predictor -> (trainable, total)
    std::vector<TimingRow> timing;
    std::string config_hash;

    static constexpr const char* kHeader =
        "suite\tpredictor\tcondition\tx\tstatus\tnmse\tnmse_db\tse\tse_perfect\tber\tsamples\tdataset_hash\tseed";

    std::string to_tsv() const
    {
        std::ostringstream os;
        os << "# config_hash " << config_hash << '\n' << kHeader << '\n';
        os << std::setprecision(9);
        for (const auto& r : rows) {
            os << r.suite << '\t' << r.predictor << '\t' << r.condition << '\t' << r.x << '\t'
               << (r.absent ? "absent" : "ok") << '\t';
            if (r.absent)
                os << "nan\tnan\tnan\tnan\tnan\t0";
            else
                os << r.nmse << '\t' << r.nmse_db << '\t' << r.se << '\t' << r.se_perfect << '\t' << r.ber << '\t'
                   << r.samples;
            os << '\t' << r.dataset_hash << '\t' << r.seed << '\n';
        }
        return os.str();
    }

    // Column arrays, one entry per row, for plotting.
    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["config_hash"] = config_hash;
        auto& c = j["columns"];
        for (const char* k : {"suite", "predictor", "condition", "status", "dataset_hash"})
            c[k] = nlohmann::json::array();
        for (const char* k : {"x", "nmse", "nmse_db", "se", "se_perfect", "ber", "samples", "seed"})
            c[k] = nlohmann::json::array();
        for (const auto& r : rows) {
            c["suite"].push_back(r.suite);
            c["predictor"].push_back(r.predictor);
            c["condition"].push_back(r.condition);
            c["status"].push_back(r.absent ? "absent" : "ok");
            c["dataset_hash"].push_back(r.dataset_hash);
            c["x"].push_back(r.x);
            c["nmse"].push_back(r.absent ? nlohmann::json() : nlohmann::json(r.nmse));
            c["nmse_db"].push_back(r.absent ? nlohmann::json() : nlohmann::json(r.nmse_db));
            c["se"].push_back(r.absent ? nlohmann::json() : nlohmann::json(r.se));
            c["se_perfect"].push_back(r.absent ? nlohmann::json() : nlohmann::json(r.se_perfect));
            c["ber"].push_back(r.absent ? nlohmann::json() : nlohmann::json(r.ber));
            c["samples"].push_back(r.samples);
            c["seed"].push_back(r.seed);
        }
        auto& p = j["params"];
        p = nlohmann::json::object();
        for (const auto& [k, v] : params)
            p[k] = {{"trainable", v.first}, {"total", v.second}};
        auto& t = j["timing"];
        t = nlohmann::json::array();
        for (const auto& r : timing)
            t.push_back({{"predictor", r.predictor}, {"train_ms", r.train_ms}, {"infer_ms", r.infer_ms}, {"batch", r.batch}});
        return j;
    }
};

struct ConditionMetrics {
    double nmse = 0.0, se = 0.0, se_perfect = 0.0, ber = 0.0;
    std::size_t samples = 0;
};

// Runs one predictor over a dataset. History noise (if any) is seeded per
// sample from (seed, index), so every predictor sees the same noisy inputs.
inline ConditionMetrics evaluate_condition(Predictor& p, const chansim::Dataset& ds, double history_snr_db,
                                           const LinkConfig& link, std::uint64_t seed, int chunk = 256)
{
    ConditionMetrics m;
    const int L = ds.scenario.horizon;
    if (link.ber_step >= L)
        throw ConfigError("link: SE/BER step outside the horizon");
    std::vector<chansim::CsiSample> buf;
    for (std::size_t i = 0; i < ds.samples.size(); i += static_cast<std::size_t>(chunk)) {
        const std::size_t end = std::min(ds.samples.size(), i + static_cast<std::size_t>(chunk));
        buf.assign(ds.samples.begin() + static_cast<std::ptrdiff_t>(i), ds.samples.begin() + static_cast<std::ptrdiff_t>(end));
        if (std::isfinite(history_snr_db))
            for (std::size_t j = 0; j < buf.size(); ++j) {
                Rng r(derive_seed(seed, i + j, 0xB0));
                buf[j] = chansim::add_noise(std::move(buf[j]), history_snr_db, r);
            }
        SamplePtrs ptrs;
        for (const auto& s : buf)
            ptrs.push_back(&s);
        const auto pred = p.predict(ptrs, L);
        for (std::size_t j = 0; j < buf.size(); ++j) {
            const auto& truth = ds.samples[i + j].downlink;
            m.nmse += nmse_metric(pred[j], truth);
            const CMat h = csi_slice(truth, link.ber_step);
            const CMat hp = csi_slice(pred[j], link.ber_step);
            m.se += spectral_efficiency(h, hp, link);
            m.se_perfect += spectral_efficiency(h, h, link);
            if (i + j < static_cast<std::size_t>(link.ber_samples)) {
                Rng r(derive_seed(seed, i + j, 0xBE));
                m.ber += ber_4qam(h, hp, link, r);
            }
        }
    }
    m.samples = ds.samples.size();
    const auto n = static_cast<double>(m.samples);
    m.nmse /= n;
    m.se /= n;
    m.se_perfect /= n;
    const auto nb = std::min<std::size_t>(m.samples, static_cast<std::size_t>(link.ber_samples));
    m.ber = nb ? m.ber / static_cast<double>(nb) : 0.0;
    return m;
}

inline EvalReport run_suite(Suite suite, const std::vector<NamedPredictor>& predictors,
                            const std::vector<Condition>& conditions, const LinkConfig& link, std::uint64_t seed)
{
    link.validate();
    EvalReport rep;
    std::map<const chansim::Dataset*, std::string> hashes;
    for (const auto& c : conditions)
        if (c.data && !hashes.count(c.data))
            hashes[c.data] = hex64(chansim::dataset_hash(*c.data));
    for (const auto& np : predictors)
        for (const auto& c : conditions) {
            ReportRow r;
            r.suite = to_string(suite);
            r.predictor = np.label;
            r.condition = c.label;
            r.x = c.x;
            r.seed = seed;
            r.dataset_hash = c.data ? hashes[c.data] : "";
            if (!np.predictor || !c.data) {
                r.absent = true;
            } else {
                const auto m = evaluate_condition(*np.predictor, *c.data, c.history_snr_db, link, seed);
                r.nmse = m.nmse;
                r.nmse_db = to_db(m.nmse);
                r.se = m.se;
                r.se_perfect = m.se_perfect;
                r.ber = m.ber;
                r.samples = m.samples;
            }
            rep.rows.push_back(std::move(r));
        }
    return rep;
}

// Velocity grid in km/h used by the test splits.
inline std::vector<double> velocity_grid(bool desk)
{
    if (desk)
        return {10, 40, 70, 100};
    return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
}

inline std::vector<double> noise_grid() { return {0, 5, 10, 15, 20, 25}; }

inline double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median wall-clock per batch over `reps` timed batches after `warmup`
// untimed ones. Training time covers forward, backward and one Adam step;
// predictors without a model report zero training time.
template <class T>
TimingRow timing_probe(const std::string& label, Predictor& p, SequenceModel<T>* model, const SamplePtrs& batch,
                       int warmup = 3, int reps = 20)
{
    using clock = std::chrono::steady_clock;
    if (warmup < 3 || reps < 20)
        throw ConfigError("timing_probe: needs >= 3 warmup and >= 20 timed batches");
    TimingRow row;
    row.predictor = label;
    row.batch = static_cast<int>(batch.size());
    const int L = batch.front()->downlink.steps;
    std::vector<double> infer;
    for (int i = 0; i < warmup + reps; ++i) {
        const auto t0 = clock::now();
        auto out = p.predict(batch, L);
        const auto t1 = clock::now();
        if (i >= warmup)
            infer.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    row.infer_ms = median(infer);
    if (model) {
        auto& store = model->params();
        const auto saved = store.snapshot();
        nn::Adam<T> adam(store, {});
        const auto seqs = gather_sequences(batch);
        const Mat<T> truth = gather_truth<T>(batch);
        std::vector<double> tr;
        for (int i = 0; i < warmup + reps; ++i) {
            const auto t0 = clock::now();
            store.zero_grad();
            const auto loss = training::nmse_batch<T>(model->forward(seqs), truth, seqs.antennas, L);
            model->backward(loss.grad);
            adam.step();
            const auto t1 = clock::now();
            if (i >= warmup)
                tr.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        store.restore(saved);
        row.train_ms = median(tr);
    }
    return row;
}

} // namespace llm4cp::eval

#endif
