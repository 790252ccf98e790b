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

#include "llm4cp/llm4cp.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>
#include <unistd.h>

using namespace llm4cp;
using namespace llm4cp::test_support;
namespace fs = std::filesystem;

namespace {

chansim::ScenarioConfig tiny_scenario()
{
    auto sc = chansim::scenario_preset("desk");
    sc.num_rb = 6;
    sc.bandwidth_hz = 6 * 180e3;
    sc.history = 8;
    sc.horizon = 2;
    return sc;
}

ModelConfig tiny_model()
{
    ModelConfig m;
    m.K = 6;
    m.P = 8;
    m.L = 2;
    m.N = 2;
    m.F = 16;
    m.layers = 1;
    m.heads = 2;
    m.n1 = 1;
    m.n2 = 1;
    m.max_positions = 8;
    return m;
}

// Samples carrying only a velocity tag and a 1x1x1 channel.
chansim::Dataset tagged_dataset(std::size_t n)
{
    chansim::Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        chansim::CsiSample s;
        s.uplink = chansim::CsiTensor(1, 1, 1);
        s.downlink = chansim::CsiTensor(1, 1, 1);
        s.uplink.data[0] = cf32(1.0f, 0.0f);
        s.downlink.data[0] = cf32(1.0f, 0.0f);
        s.velocity = static_cast<float>(i);
        ds.samples.push_back(s);
    }
    return ds;
}

std::vector<unsigned char> archive_bytes(const training::Checkpoint<float>& ck, const SequenceModel<float>& m)
{
    return training::checkpoint_archive(ck, m).serialize();
}

bool same_params(const std::vector<Mat<float>>& a, const std::vector<Mat<float>>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols() ||
            std::memcmp(a[i].data(), b[i].data(), sizeof(float) * static_cast<std::size_t>(a[i].size())) != 0)
            return false;
    return true;
}

const chansim::Dataset& tiny_train()
{
    static const auto ds = chansim::build_dataset(tiny_scenario(), 12, 11);
    return ds;
}

const chansim::Dataset& tiny_val()
{
    static const auto ds = chansim::build_dataset(tiny_scenario(), 4, 12);
    return ds;
}

} // namespace

// ---- losses and schedule ------------------------------------------------

TEST(Loss, NmseCases)
{
    Rng rng(1);
    const Mat<double> t = random_mat<double>(rng, 4, 6);
    EXPECT_DOUBLE_EQ(training::nmse_loss(t, t), 0.0);
    EXPECT_DOUBLE_EQ(training::nmse_loss(Mat<double>::Zero(4, 6), t), 1.0);
    EXPECT_NEAR(training::nmse_loss(Mat<double>(2.0 * t), t), 1.0, 1e-12);
    EXPECT_THROW(training::nmse_loss(t, Mat<double>::Zero(4, 6)), std::invalid_argument);
}

TEST(Loss, BatchAveragesSamplesAndGradient)
{
    Rng rng(2);
    const int L = 2, seqs = 3;
    const Mat<double> truth = random_mat<double>(rng, 4, 2 * seqs * L);
    Mat<double> pred = truth;
    pred.leftCols(seqs * L).setZero();                           // NMSE 1
    pred.rightCols(seqs * L) = 1.5 * truth.rightCols(seqs * L); // NMSE 0.25
    const auto b = training::nmse_batch<double>(pred, truth, seqs, L);
    ASSERT_EQ(b.samples.size(), 2u);
    EXPECT_NEAR(b.samples[0], 1.0, 1e-12);
    EXPECT_NEAR(b.samples[1], 0.25, 1e-12);
    EXPECT_NEAR(b.loss, 0.625, 1e-12);

    const double h = 1e-6;
    for (int trial = 0; trial < 8; ++trial) {
        const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(pred.size()));
        Mat<double> p = pred, m = pred;
        p.data()[i] += h;
        m.data()[i] -= h;
        const double fd = (training::nmse_batch<double>(p, truth, seqs, L, false).loss -
                           training::nmse_batch<double>(m, truth, seqs, L, false).loss) / (2 * h);
        EXPECT_NEAR(b.grad.data()[i], fd, 1e-7);
    }
}

TEST(Schedule, StepDecay)
{
    training::TrainConfig cfg;
    EXPECT_DOUBLE_EQ(training::lr_at(0, cfg), 1e-3);
    EXPECT_DOUBLE_EQ(training::lr_at(149, cfg), 1e-3);
    EXPECT_NEAR(training::lr_at(150, cfg), 1e-4, 1e-18);
    EXPECT_NEAR(training::lr_at(300, cfg), 1e-5, 1e-18);
    EXPECT_NEAR(training::lr_at(449, cfg), 1e-5, 1e-18);
    EXPECT_NEAR(training::lr_at(499, cfg), 1e-6, 1e-19);
    std::set<double> distinct;
    double prev = 1.0;
    for (int e = 0; e < cfg.epochs; ++e) {
        const double lr = training::lr_at(e, cfg);
        EXPECT_LE(lr, prev);
        prev = lr;
        distinct.insert(lr);
        if (e == 449) {
            EXPECT_EQ(distinct.size(), 3u);
        }
    }
    // the floor rule starts a fourth rate at epoch 450
    EXPECT_EQ(distinct.size(), 4u);
    EXPECT_THROW(training::lr_at(500, cfg), std::out_of_range);
    EXPECT_THROW(training::lr_at(-1, cfg), std::out_of_range);
}

TEST(TrainConfig, Validation)
{
    training::TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    auto bad = c;
    bad.batch = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.lr0 = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.few_shot = 1.5;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.noise = training::NoiseRange{10.0, 5.0};
    EXPECT_THROW(bad.validate(), ConfigError);
}

// ---- few-shot subsets ---------------------------------------------------

TEST(FewShot, SizeOrderAndIdentity)
{
    const auto ds = tagged_dataset(8000);
    const auto sub = training::few_shot_subset(ds, 0.1, 7);
    ASSERT_EQ(sub.samples.size(), 800u);
    for (std::size_t i = 1; i < sub.samples.size(); ++i)
        EXPECT_LT(sub.samples[i - 1].velocity, sub.samples[i].velocity);
    const auto all = training::few_shot_subset(ds, 1.0, 7);
    EXPECT_TRUE(all.samples == ds.samples);
    const auto again = training::few_shot_subset(ds, 0.1, 7);
    EXPECT_TRUE(again.samples == sub.samples);
}

TEST(FewShot, SeedsGiveIndependentDraws)
{
    // Two independent f*n draws overlap in f^2 n samples on average.
    const auto ds = tagged_dataset(8000);
    double overlap = 0.0;
    const int pairs = 20;
    for (int p = 0; p < pairs; ++p) {
        const auto a = training::few_shot_subset(ds, 0.1, 100 + 2 * p);
        const auto b = training::few_shot_subset(ds, 0.1, 101 + 2 * p);
        std::set<float> va;
        for (const auto& s : a.samples)
            va.insert(s.velocity);
        for (const auto& s : b.samples)
            overlap += va.count(s.velocity);
    }
    EXPECT_NEAR(overlap / pairs, 80.0, 8.0);
}

TEST(FewShot, PreservesVelocityMean)
{
    const auto ds = tagged_dataset(8000);
    const auto sub = training::few_shot_subset(ds, 0.1, 3);
    double mean = 0.0;
    for (const auto& s : sub.samples)
        mean += s.velocity;
    mean /= static_cast<double>(sub.samples.size());
    EXPECT_NEAR(mean, 3999.5, 400.0);
}

TEST(FewShot, Rejections)
{
    const auto ds = tagged_dataset(8000);
    EXPECT_THROW(training::few_shot_subset(ds, 0.0, 1), ConfigError);
    EXPECT_THROW(training::few_shot_subset(ds, 1.5, 1), ConfigError);
    EXPECT_THROW(training::few_shot_subset(ds, 1e-5, 1), ConfigError);
}

// ---- noise augmentation -------------------------------------------------

TEST(NoiseAugment, FixedRangeAndPower)
{
    auto batch = tagged_dataset(10000).samples;
    Rng rng(4);
    std::vector<double> drawn;
    const auto out = training::noise_augment(batch, training::NoiseRange{25.0, 25.0}, rng, &drawn);
    ASSERT_EQ(drawn.size(), batch.size());
    for (double v : drawn)
        EXPECT_EQ(v, 25.0);
    double power = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        power += std::norm(cf64(out[i].uplink.data[0]) - 1.0);
        EXPECT_TRUE(out[i].downlink == batch[i].downlink);
    }
    power /= static_cast<double>(out.size());
    EXPECT_NEAR(power / db_to_linear(-25.0), 1.0, 0.05);
}

TEST(NoiseAugment, UniformSnrDraws)
{
    const std::size_t n = 10000;
    auto batch = tagged_dataset(n).samples;
    Rng rng(5);
    std::vector<double> drawn;
    training::noise_augment(batch, training::NoiseRange{0.0, 25.0}, rng, &drawn);
    ASSERT_EQ(drawn.size(), n);
    std::sort(drawn.begin(), drawn.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = drawn[i] / 25.0;
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    // Kolmogorov-Smirnov at the 1% level
    EXPECT_LT(d, 1.628 / std::sqrt(static_cast<double>(n)));
    EXPECT_GE(drawn.front(), 0.0);
    EXPECT_LE(drawn.back(), 25.0);
}

TEST(NoiseAugment, DisabledIsIdentity)
{
    const auto batch = tagged_dataset(16).samples;
    Rng rng(6);
    std::vector<double> drawn;
    const auto out = training::noise_augment(batch, std::nullopt, rng, &drawn);
    EXPECT_TRUE(out == batch);
    EXPECT_TRUE(drawn.empty());
}

// ---- training loop ------------------------------------------------------

TEST(Train, OverfitsOneSample)
{
    chansim::Dataset one = tiny_train();
    one.samples.resize(1);
    Llm4cpModel<float> model(tiny_model());
    model.init(3);
    const double before = training::evaluate_loss(model, one.samples, 8);
    training::TrainConfig cfg;
    cfg.batch = 1;
    cfg.epochs = 50;
    cfg.lr0 = 1e-2;
    cfg.seed = 3;
    const auto res = training::train<float>(model, one, one, cfg);
    ASSERT_FALSE(res.diverged);
    const double after = training::evaluate_loss(model, one.samples, 8);
    EXPECT_LT(after, 0.1 * before) << "before " << before << " after " << after;
}

TEST(Train, FrozenTensorsUntouched)
{
    Llm4cpModel<float> model(tiny_model());
    model.init(4);
    std::vector<std::pair<std::string, Mat<float>>> frozen;
    for (std::size_t i = 0; i < model.params().size(); ++i)
        if (!model.params()[i].trainable)
            frozen.emplace_back(model.params()[i].name, model.params()[i].value);
    ASSERT_FALSE(frozen.empty());
    training::TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = 3;
    cfg.lr0 = 1e-2;
    const auto res = training::train<float>(model, tiny_train(), tiny_val(), cfg);
    ASSERT_FALSE(res.diverged);
    for (const auto& [name, v] : frozen)
        EXPECT_TRUE(model.params().at(name).value == v) << name;
}

TEST(Train, BestMatchesLogMinimum)
{
    Llm4cpModel<float> model(tiny_model());
    model.init(5);
    training::TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = 6;
    cfg.lr0 = 5e-3;
    cfg.seed = 5;
    std::vector<training::EpochLog> seen;
    const auto res = training::train<float>(model, tiny_train(), tiny_val(), cfg, nullptr,
                                            [&](const training::EpochLog& e) { seen.push_back(e); });
    ASSERT_EQ(res.log.size(), 6u);
    ASSERT_EQ(seen.size(), 6u);
    std::size_t arg = 0;
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        EXPECT_EQ(res.log[i].epoch, static_cast<int>(i));
        EXPECT_EQ(res.log[i].val_loss, seen[i].val_loss);
        if (res.log[i].val_loss < res.log[arg].val_loss)
            arg = i;
    }
    EXPECT_EQ(res.best.val_loss, res.log[arg].val_loss);
    EXPECT_EQ(res.best.epoch, static_cast<int>(arg) + 1);
    EXPECT_EQ(res.last.epoch, 6);
    // the model ends up holding the best weights
    EXPECT_TRUE(same_params(model.params().snapshot(), res.best.params));
    EXPECT_NEAR(training::evaluate_loss(model, tiny_val().samples, 4), res.best.val_loss, 1e-6 * res.best.val_loss);
}

TEST(Train, SameSeedSameBytes)
{
    training::TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = 2;
    cfg.seed = 9;
    cfg.noise = training::NoiseRange{5.0, 20.0};
    std::vector<std::vector<unsigned char>> bytes;
    for (int run = 0; run < 2; ++run) {
        Llm4cpModel<float> model(tiny_model());
        model.init(9);
        const auto res = training::train<float>(model, tiny_train(), tiny_val(), cfg);
        bytes.push_back(archive_bytes(res.last, model));
    }
    EXPECT_TRUE(bytes[0] == bytes[1]);
}

TEST(Train, ResumeMatchesUninterrupted)
{
    training::TrainConfig cfg;
    cfg.batch = 5;
    cfg.epochs = 4;
    cfg.decay_every = 3;
    cfg.lr0 = 5e-3;
    cfg.seed = 21;
    cfg.noise = training::NoiseRange{0.0, 25.0};

    Llm4cpModel<float> full(tiny_model());
    full.init(21);
    const auto a = training::train<float>(full, tiny_train(), tiny_val(), cfg);

    Llm4cpModel<float> part(tiny_model());
    part.init(21);
    auto half = cfg;
    half.epochs = 2;
    const auto first = training::train<float>(part, tiny_train(), tiny_val(), half);
    // round trip through the archive, as a resumed CLI run would
    const auto ck = training::checkpoint_from_archive(training::checkpoint_archive(first.last, part), part);
    Llm4cpModel<float> resumed(tiny_model());
    resumed.init(0);
    const auto b = training::train<float>(resumed, tiny_train(), tiny_val(), cfg, &ck);

    ASSERT_EQ(b.log.size(), 2u);
    EXPECT_EQ(b.log[0].epoch, 2);
    EXPECT_EQ(a.log[3].val_loss, b.log[1].val_loss);
    EXPECT_TRUE(archive_bytes(a.last, full) == archive_bytes(b.last, resumed));
    EXPECT_TRUE(same_params(a.best.params, b.best.params));
    EXPECT_EQ(a.best.epoch, b.best.epoch);
}

TEST(Train, NanInputDiverges)
{
    auto bad = tiny_train();
    bad.samples[0].uplink.data[3] = cf32(std::numeric_limits<float>::quiet_NaN(), 0.0f);
    auto spec = make_spec("gru", 6, 8, 2, true);
    auto model = make_model<float>(spec, 1);
    training::TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = 3;
    const auto res = training::train<float>(*model, bad, tiny_val(), cfg);
    EXPECT_TRUE(res.diverged);
    EXPECT_TRUE(res.log.empty());
}

TEST(Train, EmptyDatasetRejected)
{
    Llm4cpModel<float> model(tiny_model());
    model.init(1);
    chansim::Dataset empty;
    training::TrainConfig cfg;
    EXPECT_THROW(training::train<float>(model, empty, tiny_val(), cfg), ConfigError);
}

TEST(Checkpoint, ArchiveRoundTrip)
{
    Llm4cpModel<float> model(tiny_model());
    model.init(2);
    training::TrainConfig cfg;
    cfg.batch = 6;
    cfg.epochs = 1;
    const auto res = training::train<float>(model, tiny_train(), tiny_val(), cfg);
    const auto back = training::checkpoint_from_archive(training::checkpoint_archive(res.last, model), model);
    EXPECT_EQ(back.epoch, res.last.epoch);
    EXPECT_EQ(back.val_loss, res.last.val_loss);
    EXPECT_EQ(back.adam_steps, res.last.adam_steps);
    EXPECT_EQ(back.best_epoch, res.last.best_epoch);
    EXPECT_TRUE(same_params(back.params, res.last.params));
    EXPECT_TRUE(same_params(back.adam_m, res.last.adam_m));
    EXPECT_TRUE(same_params(back.adam_v, res.last.adam_v));
    const auto meta = training::checkpoint_metadata(res.last, 0xabcULL);
    EXPECT_NE(meta.find("config_hash 0000000000000abc"), std::string::npos);
    EXPECT_NE(meta.find("kind llm4cp"), std::string::npos);
}

// ---- metrics ------------------------------------------------------------

TEST(Metric, NmseCases)
{
    chansim::CsiTensor t(2, 3, 2), z(2, 3, 2), other(1, 3, 2);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = cf32(static_cast<float>(i) + 1.0f, -0.5f);
    EXPECT_DOUBLE_EQ(eval::nmse_metric(t, t), 0.0);
    EXPECT_DOUBLE_EQ(eval::nmse_metric(z, t), 1.0);
    EXPECT_THROW(eval::nmse_metric(t, z), std::invalid_argument);
    EXPECT_THROW(eval::nmse_metric(other, t), std::invalid_argument);
    EXPECT_NEAR(eval::to_db(0.1), -10.0, 1e-12);
}

TEST(Metric, MatchedPrecoder)
{
    Rng rng(7);
    const CVec h = random_cmat(rng, 8, 1);
    const CVec w = eval::matched_precoder(h);
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(h.dot(w)), h.norm(), 1e-12);
    EXPECT_THROW(eval::matched_precoder(CVec::Zero(4)), std::invalid_argument);
}

TEST(Metric, EffectiveGains)
{
    Rng rng(8);
    const CMat h = random_cmat(rng, 5, 4), hp = random_cmat(rng, 5, 4);
    const CVec g = eval::effective_gains(h, hp);
    for (int k = 0; k < 5; ++k) {
        cf64 ref = 0.0;
        for (int n = 0; n < 4; ++n)
            ref += std::conj(h(k, n)) * hp(k, n);
        EXPECT_NEAR(std::abs(g(k)), std::abs(ref) / hp.row(k).norm(), 1e-12);
    }
    const CVec self = eval::effective_gains(h, h);
    for (int k = 0; k < 5; ++k)
        EXPECT_NEAR(std::abs(self(k)), h.row(k).norm(), 1e-12);
    EXPECT_THROW(eval::effective_gains(h, random_cmat(rng, 5, 3)), std::invalid_argument);
}

TEST(Metric, SpectralEfficiencyCases)
{
    eval::LinkConfig link;
    CMat h(1, 2), orth(1, 2);
    h << cf64(1.0, 0.0), cf64(0.0, 1.0);
    orth << cf64(0.0, 1.0), cf64(1.0, 0.0); // h^H orth = 0
    EXPECT_NEAR(eval::spectral_efficiency(h, orth, link), 0.0, 1e-12);

    CMat one(3, 1);
    one << cf64(1, 0), cf64(0, 1), cf64(-std::sqrt(0.5), std::sqrt(0.5));
    EXPECT_NEAR(eval::spectral_efficiency(one, one, link), std::log2(11.0), 1e-12);

    // a common phase on the prediction does not change the beam gain
    Rng rng(9);
    const CMat H = random_cmat(rng, 6, 4);
    const CMat rotated = H * std::polar(1.0, 0.7);
    EXPECT_NEAR(eval::spectral_efficiency(H, rotated, link), eval::spectral_efficiency(H, H, link), 1e-12);
}

TEST(Metric, PerfectCsiBoundsSpectralEfficiency)
{
    Rng rng(10);
    eval::LinkConfig link;
    for (int trial = 0; trial < 50; ++trial) {
        const CMat h = random_cmat(rng, 6, 8);
        const CMat hp = h + 0.5 * random_cmat(rng, 6, 8);
        EXPECT_LE(eval::spectral_efficiency(h, hp, link), eval::spectral_efficiency(h, h, link) + 1e-12);
    }
}

TEST(Ber, HighSnrIsErrorFree)
{
    Rng rng(11);
    const CVec g = CVec::Ones(4);
    const auto c = eval::ber_4qam_gains(g, 40.0, 10000, rng);
    EXPECT_EQ(c.bits, 80000u);
    EXPECT_EQ(c.errors, 0u);
}

TEST(Ber, OrthogonalBeamIsCoinFlip)
{
    Rng rng(12);
    CMat h(1, 2), w(1, 2);
    h << cf64(1, 0), cf64(0, 0);
    w << cf64(0, 0), cf64(1, 0);
    eval::LinkConfig link;
    link.symbols = 50000;
    const double p = eval::ber_4qam(h, w, link, rng);
    const double sigma = std::sqrt(0.25 / (2.0 * link.symbols));
    EXPECT_NEAR(p, 0.5, 3.0 * sigma);
}

TEST(Ber, MatchesClosedForm)
{
    for (double gamma_db : {0.0, 5.0, 10.0}) {
        Rng rng(static_cast<std::uint64_t>(100 + gamma_db));
        const CVec g = CVec::Constant(4, cf64(0.6, -0.8)); // unit magnitude, arbitrary phase
        const auto c = eval::ber_4qam_gains(g, gamma_db, 100000, rng);
        const double p = eval::ber_4qam_theory(db_to_linear(gamma_db));
        const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(c.bits));
        EXPECT_NEAR(c.rate(), p, 4.0 * sigma) << gamma_db << " dB";
    }
    EXPECT_NEAR(eval::ber_4qam_theory(db_to_linear(10.0)), 7.827e-4, 1e-6);
}

TEST(Ber, MonotoneInSnr)
{
    double prev = 1.0;
    double first = 0.0, last = 0.0;
    for (double snr = 0.0; snr <= 12.0; snr += 2.0) {
        Rng rng(13); // common random numbers across SNRs
        const double p = eval::ber_4qam_gains(CVec::Ones(2), snr, 20000, rng).rate();
        EXPECT_LE(p, prev) << snr;
        prev = p;
        if (snr == 0.0)
            first = p;
        last = p;
    }
    EXPECT_GT(first, last);
}

TEST(Ber, SymbolMinimum)
{
    Rng rng(14);
    const CMat h = CMat::Ones(2, 2);
    eval::LinkConfig link;
    link.symbols = 9999;
    EXPECT_THROW(eval::ber_4qam(h, h, link, rng), ConfigError);
    EXPECT_THROW(link.validate(), ConfigError);
    link.ber_samples = 0;
    EXPECT_NO_THROW(link.validate());
}

// ---- suites -------------------------------------------------------------

TEST(Suite, NamesAndGrids)
{
    for (auto s : {eval::Suite::VelocitySweep, eval::Suite::NoiseSweep, eval::Suite::FewShot, eval::Suite::CrossScenario,
                   eval::Suite::CrossFrequency})
        EXPECT_EQ(eval::parse_suite(eval::to_string(s)), s);
    EXPECT_THROW(eval::parse_suite("velocity"), ConfigError);
    EXPECT_EQ(eval::velocity_grid(false).size(), 10u);
    EXPECT_EQ(eval::velocity_grid(false).front(), 10.0);
    EXPECT_EQ(eval::velocity_grid(false).back(), 100.0);
    EXPECT_EQ(eval::velocity_grid(true).size(), 4u);
    EXPECT_EQ(eval::noise_grid(), (std::vector<double>{0, 5, 10, 15, 20, 25}));
}

TEST(Suite, RowsAbsentAndReproducible)
{
    const auto& ds = tiny_val();
    const auto noisy = tiny_train();
    baselines::NoPrediction none;
    const std::vector<eval::NamedPredictor> preds = {{"no_prediction", &none}, {"gru", nullptr}};
    const std::vector<eval::Condition> conds = {{"clean", 30.0, &ds}, {"snr5", 5.0, &noisy, 5.0}};
    eval::LinkConfig link;
    link.ber_samples = 2;
    const auto rep = eval::run_suite(eval::Suite::NoiseSweep, preds, conds, link, 77);
    ASSERT_EQ(rep.rows.size(), 4u);
    EXPECT_FALSE(rep.rows[0].absent);
    EXPECT_TRUE(rep.rows[2].absent);
    EXPECT_TRUE(rep.rows[3].absent);
    EXPECT_EQ(rep.rows[0].samples, ds.samples.size());
    EXPECT_EQ(rep.rows[0].dataset_hash, hex64(chansim::dataset_hash(ds)));
    EXPECT_EQ(rep.rows[2].dataset_hash, rep.rows[0].dataset_hash);
    for (int i : {0, 1}) {
        EXPECT_GT(rep.rows[i].nmse, 0.0);
        EXPECT_NEAR(rep.rows[i].nmse_db, eval::to_db(rep.rows[i].nmse), 1e-12);
        EXPECT_LE(rep.rows[i].se, rep.rows[i].se_perfect + 1e-9);
        EXPECT_GE(rep.rows[i].ber, 0.0);
    }

    const auto tsv = rep.to_tsv();
    EXPECT_NE(tsv.find("noise_sweep\tgru\tclean\t30\tabsent\tnan"), std::string::npos);
    const auto again = eval::run_suite(eval::Suite::NoiseSweep, preds, conds, link, 77);
    EXPECT_EQ(again.to_tsv(), tsv);

    const auto j = rep.to_json();
    EXPECT_TRUE(j["columns"]["nmse"][2].is_null());
    EXPECT_TRUE(j["columns"]["se"][3].is_null());
    EXPECT_FALSE(j["columns"]["nmse"][0].is_null());
    EXPECT_EQ(j["columns"]["status"][2], "absent");
}

TEST(Suite, HistoryNoiseSharedAcrossPredictors)
{
    // Identical predictors see identical noisy histories.
    const auto& ds = tiny_val();
    baselines::NoPrediction a, b;
    eval::LinkConfig link;
    link.ber_samples = 0;
    const auto ma = eval::evaluate_condition(a, ds, 0.0, link, 5);
    const auto mb = eval::evaluate_condition(b, ds, 0.0, link, 5);
    EXPECT_EQ(ma.nmse, mb.nmse);
    const auto clean = eval::evaluate_condition(a, ds, std::numeric_limits<double>::infinity(), link, 5);
    EXPECT_GT(ma.nmse, clean.nmse);
}

TEST(Timing, ProbeContract)
{
    const auto& ds = tiny_train();
    SamplePtrs batch;
    for (const auto& s : ds.samples)
        batch.push_back(&s);
    baselines::NoPrediction none;
    const auto r0 = eval::timing_probe<float>("no_prediction", none, nullptr, batch);
    EXPECT_GT(r0.infer_ms, 0.0);
    EXPECT_EQ(r0.train_ms, 0.0);
    EXPECT_EQ(r0.batch, static_cast<int>(batch.size()));

    baselines::PadPredictor pad(baselines::PadConfig{4});
    EXPECT_EQ(eval::timing_probe<float>("pad", pad, nullptr, batch).train_ms, 0.0);

    auto model = std::make_shared<Llm4cpModel<float>>(tiny_model());
    model->init(1);
    const auto before = model->params().snapshot();
    ModelPredictor<float> p("llm4cp", model);
    const auto r1 = eval::timing_probe<float>("llm4cp", p, model.get(), batch);
    EXPECT_GT(r1.train_ms, 0.0);
    EXPECT_GT(r1.infer_ms, 0.0);
    EXPECT_TRUE(same_params(model->params().snapshot(), before)); // weights restored

    EXPECT_THROW(eval::timing_probe<float>("x", none, nullptr, batch, 2, 20), ConfigError);
    EXPECT_THROW(eval::timing_probe<float>("x", none, nullptr, batch, 3, 19), ConfigError);
}

TEST(Timing, MedianIsStable)
{
    const auto& ds = tiny_train();
    SamplePtrs batch;
    for (const auto& s : ds.samples)
        batch.push_back(&s);
    auto model = std::make_shared<Llm4cpModel<float>>(tiny_model());
    model->init(1);
    ModelPredictor<float> p("llm4cp", model);
    const auto a = eval::timing_probe<float>("llm4cp", p, model.get(), batch);
    const auto b = eval::timing_probe<float>("llm4cp", p, model.get(), batch);
    EXPECT_NEAR(a.train_ms / b.train_ms, 1.0, 0.25);
    EXPECT_NEAR(a.infer_ms / b.infer_ms, 1.0, 0.25);
}

// ---- configuration ------------------------------------------------------

TEST(Config, ParseText)
{
    const auto kv = config::parse_text("# header\n\n  seed = 7  # trailing\nsuite=noise_sweep , few_shot\n", "t.cfg");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv.at("seed"), "7");
    EXPECT_EQ(config::split_list(kv.at("suite")), (std::vector<std::string>{"noise_sweep", "few_shot"}));
    try {
        config::parse_text("a = 1\n\na = 2\n", "t.cfg");
        FAIL() << "duplicate key accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("t.cfg:3"), std::string::npos) << e.what();
    }
    try {
        config::parse_text("a = 1\njust words\n", "t.cfg");
        FAIL() << "line without '=' accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("t.cfg:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(config::parse_text("= 3\n"), ConfigError);
    EXPECT_THROW(config::load_file("/nonexistent/run.cfg"), IoError);
}

TEST(Config, ScalarParsing)
{
    EXPECT_EQ(config::to_int("k", "12"), 12);
    EXPECT_EQ(config::to_int("k", "1e3"), 1000);
    EXPECT_THROW(config::to_int("k", "1.5"), ConfigError);
    EXPECT_THROW(config::to_double("k", "3x"), ConfigError);
    EXPECT_TRUE(config::to_bool("k", "yes"));
    EXPECT_FALSE(config::to_bool("k", "0"));
    EXPECT_THROW(config::to_bool("k", "maybe"), ConfigError);
}

TEST(Config, ResolveDefaultsAndPrecedence)
{
    const auto full = config::resolve({}, {});
    EXPECT_EQ(full.scenario.num_rb, 48);
    EXPECT_EQ(full.train_samples, 8000u);
    EXPECT_EQ(full.train.epochs, 500);
    EXPECT_EQ(full.test_velocities_kmh.size(), 10u);

    const auto desk = config::resolve({{"desk_scale", "true"}}, {});
    EXPECT_EQ(desk.scenario.num_rb, 12);
    EXPECT_EQ(desk.scenario.antennas(), 8);
    EXPECT_EQ(desk.train_samples, 2000u);
    EXPECT_EQ(desk.test_velocities_kmh, (std::vector<double>{10, 40, 70, 100}));

    const auto c = config::resolve({{"seed", "5"}, {"epochs", "7"}, {"duplex", "fdd"}, {"noise_augment", "true"},
                                    {"noise_lo_db", "3"}},
                                   {{"seed", "9"}});
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.train.seed, 9u);
    EXPECT_EQ(c.train.epochs, 7);
    EXPECT_EQ(c.scenario.duplex, chansim::Duplex::FDD);
    ASSERT_TRUE(c.train.noise.has_value());
    EXPECT_EQ(c.train.noise->lo_db, 3.0);
    EXPECT_EQ(c.train.noise->hi_db, 25.0);
}

TEST(Config, ResolveRejections)
{
    EXPECT_THROW(config::resolve({{"bogus", "1"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"model.depth", "3"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"predictor", "llm4cp, lstmx"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"suite", "all"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"few_shot_frac", "0"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"ber_symbols", "100"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"scenario", "rma"}}, {}), ConfigError);
    EXPECT_THROW(config::resolve({{"epochs", "ten"}}, {}), ConfigError);
}

TEST(Config, HashCoversSettingsNotPaths)
{
    const auto a = config::resolve({{"out", "/tmp/a"}}, {});
    const auto b = config::resolve({{"out", "/tmp/b"}, {"data", "/d"}, {"checkpoints", "/c"}}, {});
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(b.data_dir(), "/d");
    EXPECT_EQ(a.data_dir(), "/tmp/a/data");
    EXPECT_NE(a.hash(), config::resolve({{"seed", "1"}}, {}).hash());
    EXPECT_NE(a.hash(), config::resolve({{"model.features", "64"}}, {}).hash());
}

TEST(Config, CarrierMovesSpacingToHalfWavelength)
{
    const auto base = config::resolve({}, {});
    const auto c = config::resolve({{"carrier_ghz", "4.9"}}, {});
    EXPECT_DOUBLE_EQ(c.scenario.uplink_center_hz, 4.9e9);
    EXPECT_DOUBLE_EQ(c.scenario.geometry.d_h, kSpeedOfLight / 4.9e9 / 2.0);
    EXPECT_DOUBLE_EQ(c.scenario.geometry.d_v, c.scenario.geometry.d_h);
    EXPECT_LT(c.scenario.geometry.d_h, base.scenario.geometry.d_h);
    EXPECT_NE(c.hash(), base.hash());
}

TEST(Config, ModelOverrides)
{
    const auto c = config::resolve({{"desk_scale", "true"}, {"model.features", "32"}, {"model.layers", "1"},
                                    {"model.hidden", "16"}, {"model.patch", "2"}},
                                   {});
    const auto m = std::get<ModelConfig>(c.spec("llm4cp").params);
    EXPECT_EQ(m.F, 32);
    EXPECT_EQ(m.layers, 1);
    EXPECT_EQ(m.N, 2);
    EXPECT_EQ(m.K, 12);
    EXPECT_EQ(std::get<baselines::RecurrentConfig>(c.spec("gru").params).hidden, 16);
    EXPECT_EQ(std::get<baselines::CnnConfig>(c.spec("cnn").params).channels, 32);
}

// ---- command line -------------------------------------------------------

#ifdef LLM4CP_CLI_PATH

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("llm4cp_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        std::ofstream(dir_ / "tiny.cfg") << "desk_scale = true\nnum_rb = 6\nhistory = 8\nhorizon = 2\n"
                                            "train_samples = 24\nval_samples = 8\ntest_samples = 8\n"
                                            "test_velocities_kmh = 10, 100\nepochs = 2\nbatch = 8\n"
                                            "predictor = llm4cp\nmodel.features = 16\nmodel.layers = 1\n"
                                            "model.heads = 2\nmodel.patch = 2\nber_symbols = 10000\nber_samples = 2\n";
    }
    void TearDown() override
    {
        if (!HasFailure())
            fs::remove_all(dir_);
    }

    // Runs the CLI with the tiny config and `args`; returns the exit code.
    int run(const std::string& cmd, const std::string& out, const std::string& args = "")
    {
        const std::string line = std::string(LLM4CP_CLI_PATH) + " " + cmd + " --config " + (dir_ / "tiny.cfg").string() +
                                 " --out " + (dir_ / out).string() + " " + args + " >>" + (dir_ / "cli.log").string() +
                                 " 2>&1";
        const int st = std::system(line.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    }

    std::string read(const std::string& rel) const
    {
        std::ifstream in(dir_ / rel, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    bool exists(const std::string& rel) const { return fs::exists(dir_ / rel); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, GenerateIsDeterministic)
{
    ASSERT_EQ(run("generate", "a"), 0);
    ASSERT_EQ(run("generate", "b"), 0);
    for (const char* f : {"data/train.cpds", "data/val.cpds", "data/test_v010.cpds", "data/test_v100.cpds",
                          "data/train.cpds.meta"}) {
        ASSERT_TRUE(exists(std::string("a/") + f)) << f;
        EXPECT_EQ(read(std::string("a/") + f), read(std::string("b/") + f)) << f;
    }
    const auto ds = chansim::load_dataset((dir_ / "a/data/test_v100.cpds").string());
    EXPECT_EQ(ds.samples.size(), 8u);
    EXPECT_NEAR(ds.samples[0].velocity, 100.0 / 3.6, 1e-4);
    EXPECT_TRUE(exists("a/manifest.tsv"));
    EXPECT_TRUE(exists("a/generate.cfg"));
}

TEST_F(Cli, TrainEvaluateReport)
{
    ASSERT_EQ(run("generate", "r"), 0);
    ASSERT_EQ(run("train", "r"), 0);
    EXPECT_TRUE(exists("r/checkpoints/llm4cp.cpwt"));
    EXPECT_TRUE(exists("r/checkpoints/llm4cp.cpwt.meta"));
    EXPECT_TRUE(exists("r/checkpoints/llm4cp.last.cpwt"));
    const auto log = read("r/checkpoints/llm4cp.log.tsv");
    EXPECT_NE(log.find("# train_samples 24 of 24"), std::string::npos);

    // gru has no checkpoint: its rows are absent and the exit code says so
    const std::string preds = "--predictor llm4cp,no_prediction,gru";
    ASSERT_EQ(run("evaluate", "r", preds), 5);
    const auto gru = read("r/reports/velocity_sweep_gru_s2024.tsv");
    EXPECT_NE(gru.find("\tabsent\t"), std::string::npos);
    const auto llm = read("r/reports/velocity_sweep_llm4cp_s2024.tsv");
    const auto llm_json = read("r/reports/velocity_sweep_llm4cp_s2024.json");
    EXPECT_NE(llm.find("\tok\t"), std::string::npos);
    ASSERT_EQ(run("evaluate", "r", preds), 5);
    EXPECT_EQ(read("r/reports/velocity_sweep_llm4cp_s2024.tsv"), llm);
    EXPECT_EQ(read("r/reports/velocity_sweep_llm4cp_s2024.json"), llm_json);

    ASSERT_EQ(run("report", "r", preds), 0);
    const auto fig = read("r/figures/velocity_sweep_nmse_db.tsv");
    EXPECT_NE(fig.find("velocity_kmh\tllm4cp\tno_prediction\tgru"), std::string::npos) << fig;
    EXPECT_TRUE(exists("r/figures/params.tsv"));
    const auto manifest = read("r/manifest.tsv");
    EXPECT_NE(manifest.find("reports/velocity_sweep_llm4cp_s2024.tsv\t"), std::string::npos);
    EXPECT_NE(manifest.find("# run train"), std::string::npos);
}

TEST_F(Cli, TrainingIsReproducibleAndResumable)
{
    ASSERT_EQ(run("generate", "t"), 0);
    const std::string data = "--data " + (dir_ / "t/data").string();
    ASSERT_EQ(run("train", "x", data), 0);
    ASSERT_EQ(run("train", "y", data), 0);
    EXPECT_EQ(read("x/checkpoints/llm4cp.cpwt"), read("y/checkpoints/llm4cp.cpwt"));
    EXPECT_EQ(read("x/checkpoints/llm4cp.last.cpwt"), read("y/checkpoints/llm4cp.last.cpwt"));

    ASSERT_EQ(run("train", "z", data + " --epochs 1"), 0);
    ASSERT_EQ(run("train", "z", data + " --resume"), 0);
    EXPECT_EQ(read("x/checkpoints/llm4cp.cpwt"), read("z/checkpoints/llm4cp.cpwt"));
    EXPECT_EQ(read("x/checkpoints/llm4cp.last.cpwt"), read("z/checkpoints/llm4cp.last.cpwt"));

    ASSERT_EQ(run("train", "f", data + " --few-shot-frac 0.5"), 0);
    EXPECT_NE(read("f/checkpoints/llm4cp.log.tsv").find("# train_samples 12 of 24"), std::string::npos);
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(run("report", "empty"), 3);
    EXPECT_EQ(run("train", "nodata"), 3);
    EXPECT_EQ(run("generate", "bad", "--set bogus_key=1"), 2);
    EXPECT_EQ(run("generate", "bad", "--set train_samples=0"), 2);
    EXPECT_EQ(run("generate", "bad", "--predictor lstmx"), 2);
    const std::string missing = std::string(LLM4CP_CLI_PATH) + " generate --config " + (dir_ / "none.cfg").string() +
                                " >/dev/null 2>&1";
    const int st = std::system(missing.c_str());
    EXPECT_EQ(WEXITSTATUS(st), 3);
    const std::string unknown = std::string(LLM4CP_CLI_PATH) + " frobnicate >/dev/null 2>&1";
    EXPECT_EQ(WEXITSTATUS(std::system(unknown.c_str())), 2);
}

#endif
