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

#ifndef LLM4CP_CHANSIM_HPP
#define LLM4CP_CHANSIM_HPP

#include "common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Cluster-based multipath channel synthesis for a single-antenna user and a
// uniform planar array at the base station, plus the TDD/FDD prediction
// dataset layout built on the pilot (resource block) grid.
//
// Covered:
// - UPA steering vectors (horizontal x vertical Kronecker structure)
// - Random cluster/path draws with exponential delay profile and
//   wrapped-Gaussian intra-cluster angle spread
// - Per-path Doppler from user speed, heading and arrival direction
// - Uplink history / downlink future tensors for TDD and FDD
// - Complex AWGN on the uplink history

namespace llm4cp::chansim {

enum class Duplex : std::uint8_t { TDD = 0, FDD = 1 };

inline std::string to_string(Duplex d) { return d == Duplex::TDD ? "tdd" : "fdd"; }

inline Duplex parse_duplex(const std::string& s)
{
    if (s == "tdd" || s == "TDD") return Duplex::TDD;
    if (s == "fdd" || s == "FDD") return Duplex::FDD;
    throw ConfigError("unknown duplex mode '" + s + "' (expected tdd or fdd)");
}

struct ArrayGeometry {
    int n_h = 4;
    int n_v = 4;
    double d_h = kSpeedOfLight / 2.4e9 / 2.0; // half wavelength at 2.4 GHz
    double d_v = kSpeedOfLight / 2.4e9 / 2.0;
    int polarizations = 2;

    int elements() const { return n_h * n_v; }

    void validate() const
    {
        if (n_h < 1 || n_v < 1)
            throw ConfigError("array must have at least one element per axis");
        if (!(d_h > 0.0) || !(d_v > 0.0) || !std::isfinite(d_h) || !std::isfinite(d_v))
            throw ConfigError("antenna spacing must be positive and finite");
        if (polarizations != 1 && polarizations != 2)
            throw ConfigError("polarizations must be 1 or 2");
    }
};

// Structure-of-arrays view of all N*M paths of one channel realization.
struct PathParams {
    std::vector<cf64> gain;        // beta
    std::vector<double> doppler;   // Hz
    std::vector<double> delay;     // s
    std::vector<double> phase;     // rad
    std::vector<double> azimuth;   // rad, departure at the array
    std::vector<double> elevation; // rad, departure at the array
    std::vector<int> cluster;

    std::size_t size() const { return gain.size(); }

    void resize(std::size_t n)
    {
        gain.resize(n);
        doppler.resize(n);
        delay.resize(n);
        phase.resize(n);
        azimuth.resize(n);
        elevation.resize(n);
        cluster.resize(n);
    }

    double total_power() const
    {
        double p = 0.0;
        for (const auto& b : gain)
            p += std::norm(b);
        return p;
    }
};

struct UserTrajectory {
    double speed = 0.0;   // m/s
    double heading = 0.0; // rad
    std::array<double, 3> position{0.0, 0.0, 1.5};
    std::vector<double> path_cosine; // cosine between velocity and each path's arrival direction
};

struct ScenarioConfig {
    std::uint32_t scenario_id = 0;
    double uplink_center_hz = 2.4e9;
    Duplex duplex = Duplex::TDD;
    double bandwidth_hz = 8.64e6;
    int num_rb = 48;  // K
    int history = 16; // P
    int horizon = 4;  // L
    double pilot_interval_s = 0.5e-3;
    double pilot_spacing_hz = 180e3;
    int clusters = 21;
    int paths_per_cluster = 20;
    double velocity_min_mps = 10.0 / 3.6;
    double velocity_max_mps = 100.0 / 3.6;
    ArrayGeometry geometry{};

    // Stand-in large-scale statistics for the cluster draws.
    double delay_spread_s = 1e-6;
    double delay_scaling = 2.3;
    double angle_spread_deg = 10.0;
    double cluster_shadowing_db = 3.0;
    double ray_delay_jitter_s = 5e-9;

    std::uint64_t seed = 1;

    int antennas() const { return geometry.elements(); }

    double downlink_center_hz() const
    {
        return duplex == Duplex::TDD ? uplink_center_hz : uplink_center_hz + bandwidth_hz;
    }

    // Pilot k sits in the middle of resource block k.
    double pilot_frequency(double center_hz, int k) const
    {
        return center_hz - 0.5 * bandwidth_hz + (static_cast<double>(k) + 0.5) * pilot_spacing_hz;
    }

    void validate() const
    {
        geometry.validate();
        if (num_rb < 1 || history < 1 || horizon < 1)
            throw ConfigError("K, P and L must be positive");
        if (clusters < 1 || paths_per_cluster < 1)
            throw ConfigError("cluster and path counts must be positive");
        if (!(uplink_center_hz > 0.0) || !(bandwidth_hz > 0.0) || !(pilot_interval_s > 0.0) || !(pilot_spacing_hz > 0.0))
            throw ConfigError("carrier, bandwidth, pilot interval and pilot spacing must be positive");
        if (std::abs(num_rb * pilot_spacing_hz - bandwidth_hz) > 1e-6 * bandwidth_hz)
            throw ConfigError("K * pilot spacing must equal the bandwidth");
        if (velocity_min_mps < 0.0 || velocity_max_mps < velocity_min_mps)
            throw ConfigError("invalid velocity range");
        if (!(delay_spread_s > 0.0) || !(delay_scaling > 0.0) || angle_spread_deg < 0.0 ||
            cluster_shadowing_db < 0.0 || ray_delay_jitter_s < 0.0)
            throw ConfigError("invalid cluster statistics");
    }
};

// Named starting points. "uma" mirrors the benchmark grid (K=48, 4x4 UPA),
// "umi" is a denser-scattering, shorter-delay variant used for zero-shot
// cross-scenario tests, "desk" is a reduced grid that trains in minutes.
inline ScenarioConfig scenario_preset(const std::string& name)
{
    ScenarioConfig s;
    if (name == "uma") {
        s.scenario_id = 0;
    } else if (name == "umi") {
        s.scenario_id = 1;
        s.clusters = 19;
        s.delay_spread_s = 0.3e-6;
        s.angle_spread_deg = 17.0;
    } else if (name == "desk") {
        s.scenario_id = 2;
        s.num_rb = 12;
        s.bandwidth_hz = 12 * 180e3;
        s.geometry.n_h = 4;
        s.geometry.n_v = 2;
    } else {
        throw ConfigError("unknown scenario preset '" + name + "'");
    }
    return s;
}

inline double wrap_angle(double x)
{
    double y = std::remainder(x, 2.0 * kPi);
    return y <= -kPi ? y + 2.0 * kPi : y;
}

// a(theta, phi) = a_h(theta, phi) (x) a_v(theta); element index i_h * n_v + i_v.
inline CVec steering_vector(double theta, double phi, double f, const ArrayGeometry& geom)
{
    if (!std::isfinite(theta) || !std::isfinite(phi) || !std::isfinite(f))
        throw std::invalid_argument("steering_vector: non-finite input");
    const double kh = 2.0 * kPi * f * geom.d_h * std::sin(phi) * std::cos(theta) / kSpeedOfLight;
    const double kv = 2.0 * kPi * f * geom.d_v * std::sin(theta) / kSpeedOfLight;
    CVec a(geom.elements());
    for (int ih = 0; ih < geom.n_h; ++ih)
        for (int iv = 0; iv < geom.n_v; ++iv)
            a(ih * geom.n_v + iv) = std::polar(1.0, kh * ih + kv * iv);
    return a;
}

inline double doppler_shift(double speed, double f, double cosine)
{
    return speed * f * cosine / kSpeedOfLight;
}

inline std::pair<PathParams, UserTrajectory> sample_paths(const ScenarioConfig& sc, Rng& rng,
                                                          std::optional<double> speed = std::nullopt)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n_clusters = sc.clusters;
    const int n_paths = sc.paths_per_cluster;
    const double spread = sc.angle_spread_deg * kPi / 180.0;

    UserTrajectory traj;
    traj.speed = speed ? *speed : sc.velocity_min_mps + (sc.velocity_max_mps - sc.velocity_min_mps) * unit(rng);
    traj.heading = angle(rng);
    {
        const double r = 35.0 + (500.0 - 35.0) * std::sqrt(unit(rng));
        const double a = angle(rng);
        traj.position = {r * std::cos(a), r * std::sin(a), 1.5};
    }

    // Exponential delay profile, shifted so the first cluster arrives at 0.
    std::vector<double> tau(static_cast<std::size_t>(n_clusters));
    for (auto& t : tau)
        t = -sc.delay_scaling * sc.delay_spread_s * std::log(1.0 - unit(rng));
    std::sort(tau.begin(), tau.end());
    const double tau0 = tau.front();
    for (auto& t : tau)
        t -= tau0;

    std::vector<double> power(tau.size());
    double total = 0.0;
    for (std::size_t n = 0; n < tau.size(); ++n) {
        const double shadow = sc.cluster_shadowing_db * gauss(rng);
        power[n] = std::exp(-tau[n] * (sc.delay_scaling - 1.0) / (sc.delay_scaling * sc.delay_spread_s)) *
                   std::pow(10.0, -shadow / 10.0);
        total += power[n];
    }
    for (auto& p : power)
        p /= total;

    PathParams paths;
    paths.resize(static_cast<std::size_t>(n_clusters * n_paths));
    traj.path_cosine.resize(paths.size());

    std::size_t idx = 0;
    for (int n = 0; n < n_clusters; ++n) {
        // Isotropic cluster directions: both direction cosines seen by the
        // array, sin(theta) and sin(phi)cos(theta), are uniform on [-1, 1].
        const double theta_c = std::asin(2.0 * unit(rng) - 1.0);
        const double phi_c = angle(rng);
        const double aoa_c = angle(rng);
        const double zoa_c = 0.5 * kPi + spread * gauss(rng);
        const double amplitude = std::sqrt(power[static_cast<std::size_t>(n)] / n_paths);
        for (int m = 0; m < n_paths; ++m, ++idx) {
            paths.cluster[idx] = n;
            paths.azimuth[idx] = wrap_angle(theta_c + spread * gauss(rng));
            paths.elevation[idx] = wrap_angle(phi_c + spread * gauss(rng));
            paths.delay[idx] = tau[static_cast<std::size_t>(n)] + sc.ray_delay_jitter_s * unit(rng);
            paths.phase[idx] = angle(rng);
            paths.gain[idx] = cf64(amplitude, 0.0);
            const double aoa = aoa_c + spread * gauss(rng);
            const double zoa = zoa_c + spread * gauss(rng);
            const double cosine = std::clamp(std::sin(zoa) * std::cos(aoa - traj.heading), -1.0, 1.0);
            traj.path_cosine[idx] = cosine;
            paths.doppler[idx] = doppler_shift(traj.speed, sc.uplink_center_hz, cosine);
        }
    }
    return {std::move(paths), std::move(traj)};
}

// Second polarization: same geometry, delays and Doppler, independent phases.
inline PathParams redraw_phases(PathParams paths, Rng& rng)
{
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    for (auto& ph : paths.phase)
        ph = angle(rng);
    return paths;
}

inline CVec evaluate_csi(const PathParams& paths, double t, double f, const ArrayGeometry& geom)
{
    CVec h = CVec::Zero(geom.elements());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const double arg = 2.0 * kPi * (paths.doppler[p] * t - f * paths.delay[p]) + paths.phase[p];
        h += paths.gain[p] * std::polar(1.0, arg) * steering_vector(paths.azimuth[p], paths.elevation[p], f, geom);
    }
    return h;
}

// Dense [time][subcarrier][antenna] complex tensor in single precision.
struct CsiTensor {
    int steps = 0;
    int subcarriers = 0;
    int antennas = 0;
    std::vector<cf32> data;

    CsiTensor() = default;
    CsiTensor(int t, int k, int n)
        : steps(t), subcarriers(k), antennas(n),
          data(static_cast<std::size_t>(t) * static_cast<std::size_t>(k) * static_cast<std::size_t>(n))
    {
    }

    std::size_t index(int t, int k, int n) const
    {
        return (static_cast<std::size_t>(t) * static_cast<std::size_t>(subcarriers) + static_cast<std::size_t>(k)) *
                   static_cast<std::size_t>(antennas) +
               static_cast<std::size_t>(n);
    }
    cf32& operator()(int t, int k, int n) { return data[index(t, k, n)]; }
    const cf32& operator()(int t, int k, int n) const { return data[index(t, k, n)]; }

    double energy() const
    {
        double e = 0.0;
        for (const auto& z : data)
            e += std::norm(cf64(z));
        return e;
    }
    double mean_power() const { return data.empty() ? 0.0 : energy() / static_cast<double>(data.size()); }

    bool operator==(const CsiTensor&) const = default;
};

struct CsiSample {
    CsiTensor uplink;   // [P][K][Nt]
    CsiTensor downlink; // [L][K][Nt]
    float velocity = 0.0f; // m/s
    std::uint32_t scenario_id = 0;
    std::uint32_t polarization = 0;

    bool operator==(const CsiSample&) const = default;
};

namespace detail {

// H[t][k][:] = sum_p e^{j 2 pi nu_p t} g_{p,k} a_p(f_k), evaluated as one
// complex GEMM per subcarrier. Same values as evaluate_csi, far fewer exps.
inline CsiTensor synthesize_block(const PathParams& paths, const ScenarioConfig& sc, double center_hz, int first_step,
                                  int steps)
{
    const int K = sc.num_rb;
    const int Nt = sc.antennas();
    const int n_h = sc.geometry.n_h;
    const int n_v = sc.geometry.n_v;
    const auto n_paths = static_cast<Eigen::Index>(paths.size());

    CMat time_factor(n_paths, steps);
    for (Eigen::Index p = 0; p < n_paths; ++p)
        for (int s = 0; s < steps; ++s) {
            const double t = (first_step + s) * sc.pilot_interval_s;
            time_factor(p, s) = std::polar(1.0, 2.0 * kPi * paths.doppler[static_cast<std::size_t>(p)] * t);
        }

    // Per-path spatial phase slopes per Hz, see steering_vector.
    std::vector<double> slope_h(paths.size()), slope_v(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        slope_h[p] = 2.0 * kPi * sc.geometry.d_h * std::sin(paths.elevation[p]) * std::cos(paths.azimuth[p]) /
                     kSpeedOfLight;
        slope_v[p] = 2.0 * kPi * sc.geometry.d_v * std::sin(paths.azimuth[p]) / kSpeedOfLight;
    }

    CsiTensor out(steps, K, Nt);
    CMat spatial(Nt, n_paths);
    std::vector<cf64> ah(static_cast<std::size_t>(n_h)), av(static_cast<std::size_t>(n_v));
    for (int k = 0; k < K; ++k) {
        const double f = sc.pilot_frequency(center_hz, k);
        for (Eigen::Index p = 0; p < n_paths; ++p) {
            const auto q = static_cast<std::size_t>(p);
            const cf64 g = paths.gain[q] * std::polar(1.0, paths.phase[q] - 2.0 * kPi * f * paths.delay[q]);
            const cf64 step_h = std::polar(1.0, slope_h[q] * f);
            const cf64 step_v = std::polar(1.0, slope_v[q] * f);
            ah[0] = g;
            for (int i = 1; i < n_h; ++i)
                ah[static_cast<std::size_t>(i)] = ah[static_cast<std::size_t>(i - 1)] * step_h;
            av[0] = 1.0;
            for (int i = 1; i < n_v; ++i)
                av[static_cast<std::size_t>(i)] = av[static_cast<std::size_t>(i - 1)] * step_v;
            for (int ih = 0; ih < n_h; ++ih)
                for (int iv = 0; iv < n_v; ++iv)
                    spatial(ih * n_v + iv, p) = ah[static_cast<std::size_t>(ih)] * av[static_cast<std::size_t>(iv)];
        }
        const CMat h = spatial * time_factor; // Nt x steps
        for (int s = 0; s < steps; ++s)
            for (int n = 0; n < Nt; ++n)
                out(s, k, n) = cf32(h(n, s));
    }
    return out;
}

} // namespace detail

// Builds one record from an already drawn channel realization. Both blocks
// share one real scale factor so that the mean element power over the whole
// record (history and future) is exactly one; the prediction relation
// between uplink and downlink is untouched by it.
inline CsiSample sample_from_paths(const ScenarioConfig& sc, const PathParams& paths, const UserTrajectory& traj,
                                   std::uint32_t polarization = 0)
{
    CsiSample s;
    s.uplink = detail::synthesize_block(paths, sc, sc.uplink_center_hz, 0, sc.history);
    s.downlink = detail::synthesize_block(paths, sc, sc.downlink_center_hz(), sc.history, sc.horizon);
    const double power = (s.uplink.energy() + s.downlink.energy()) /
                         static_cast<double>(s.uplink.data.size() + s.downlink.data.size());
    if (power > 0.0) {
        const auto scale = static_cast<float>(1.0 / std::sqrt(power));
        for (auto& z : s.uplink.data)
            z *= scale;
        for (auto& z : s.downlink.data)
            z *= scale;
    }
    s.velocity = static_cast<float>(traj.speed);
    s.scenario_id = sc.scenario_id;
    s.polarization = polarization;
    return s;
}

inline CsiSample generate_sample(const ScenarioConfig& sc, Rng& rng, std::optional<double> speed = std::nullopt)
{
    auto [paths, traj] = sample_paths(sc, rng, speed);
    return sample_from_paths(sc, paths, traj, 0);
}

inline constexpr std::uint16_t kDatasetVersion = 1;

struct Dataset {
    ScenarioConfig scenario;
    std::uint16_t version = kDatasetVersion;
    std::vector<CsiSample> samples;

    std::size_t size() const { return samples.size(); }
};

// Samples 2m and 2m+1 of a dual-polarized scenario share one geometry draw.
// Every sample is seeded from (seed, index) alone, so datasets are identical
// regardless of generation order.
inline Dataset build_dataset(const ScenarioConfig& sc, std::size_t count, std::uint64_t seed,
                             std::optional<double> fixed_speed = std::nullopt)
{
    sc.validate();
    if (count == 0)
        throw ConfigError("build_dataset: count must be positive");
    Dataset ds;
    ds.scenario = sc;
    ds.scenario.seed = seed;
    ds.samples.reserve(count);
    const auto pols = static_cast<std::size_t>(sc.geometry.polarizations);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t group = i / pols;
        const auto pol = static_cast<std::uint32_t>(i % pols);
        Rng geo_rng(derive_seed(seed, group, 1));
        auto [paths, traj] = sample_paths(sc, geo_rng, fixed_speed);
        if (pol != 0) {
            Rng phase_rng(derive_seed(seed, i, 2));
            paths = redraw_phases(std::move(paths), phase_rng);
        }
        ds.samples.push_back(sample_from_paths(sc, paths, traj, pol));
    }
    return ds;
}

// Circular complex white noise on the uplink history only. Per-element
// variance is (mean uplink power) / 10^(snr/10); +inf leaves the sample as is.
inline CsiSample add_noise(CsiSample sample, double snr_db, Rng& rng)
{
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("add_noise: SNR must be finite or +inf");
    if (std::isinf(snr_db))
        return sample;
    const double variance = sample.uplink.mean_power() / db_to_linear(snr_db);
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
    for (auto& z : sample.uplink.data)
        z += cf32(static_cast<float>(gauss(rng)), static_cast<float>(gauss(rng)));
    return sample;
}

} // namespace llm4cp::chansim

#endif
