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

#ifndef LLM4CP_DATASET_IO_HPP
#define LLM4CP_DATASET_IO_HPP

#include "binary_io.hpp"
#include "chansim.hpp"

// Dataset file layout (all little-endian):
//
//   "CPDS"  u16 version  u8 duplex
//   u32 scenario_id K P L clusters paths_per_cluster n_h n_v polarizations
//   f64 uplink_center bandwidth pilot_interval pilot_spacing v_min v_max
//       d_h d_v delay_spread delay_scaling angle_spread_deg shadowing_db
//       ray_delay_jitter
//   u64 seed  u64 sample_count
//   per sample: f32 velocity, then uplink [P][K][Nt] and downlink [L][K][Nt]
//               as interleaved f32 (re, im)
//
// The polarization id of a record is positional (index % polarizations).

namespace llm4cp::chansim {

inline void write_header(io::ByteWriter& w, const ScenarioConfig& sc, std::uint16_t version, std::uint64_t count)
{
    w.tag("CPDS");
    w.u16(version);
    w.u8(static_cast<std::uint8_t>(sc.duplex));
    for (auto v : {static_cast<int>(sc.scenario_id), sc.num_rb, sc.history, sc.horizon, sc.clusters,
                   sc.paths_per_cluster, sc.geometry.n_h, sc.geometry.n_v, sc.geometry.polarizations})
        w.u32(static_cast<std::uint32_t>(v));
    for (auto v : {sc.uplink_center_hz, sc.bandwidth_hz, sc.pilot_interval_s, sc.pilot_spacing_hz,
                   sc.velocity_min_mps, sc.velocity_max_mps, sc.geometry.d_h, sc.geometry.d_v, sc.delay_spread_s,
                   sc.delay_scaling, sc.angle_spread_deg, sc.cluster_shadowing_db, sc.ray_delay_jitter_s})
        w.f64(v);
    w.u64(sc.seed);
    w.u64(count);
}

inline std::vector<unsigned char> serialize(const Dataset& ds)
{
    io::ByteWriter w;
    write_header(w, ds.scenario, ds.version, ds.samples.size());
    const auto put = [&](const CsiTensor& t) {
        for (const auto& z : t.data) {
            w.f32(z.real());
            w.f32(z.imag());
        }
    };
    for (const auto& s : ds.samples) {
        w.f32(s.velocity);
        put(s.uplink);
        put(s.downlink);
    }
    return w.buffer();
}

inline Dataset deserialize(io::ByteReader& r)
{
    Dataset ds;
    r.expect_tag("CPDS");
    ds.version = r.u16();
    if (ds.version != kDatasetVersion)
        throw IoError(r.origin() + ": unsupported dataset version " + std::to_string(ds.version));
    auto& sc = ds.scenario;
    const auto duplex = r.u8();
    if (duplex > 1)
        throw IoError(r.origin() + ": bad duplex code");
    sc.duplex = static_cast<Duplex>(duplex);
    sc.scenario_id = r.u32();
    sc.num_rb = static_cast<int>(r.u32());
    sc.history = static_cast<int>(r.u32());
    sc.horizon = static_cast<int>(r.u32());
    sc.clusters = static_cast<int>(r.u32());
    sc.paths_per_cluster = static_cast<int>(r.u32());
    sc.geometry.n_h = static_cast<int>(r.u32());
    sc.geometry.n_v = static_cast<int>(r.u32());
    sc.geometry.polarizations = static_cast<int>(r.u32());
    sc.uplink_center_hz = r.f64();
    sc.bandwidth_hz = r.f64();
    sc.pilot_interval_s = r.f64();
    sc.pilot_spacing_hz = r.f64();
    sc.velocity_min_mps = r.f64();
    sc.velocity_max_mps = r.f64();
    sc.geometry.d_h = r.f64();
    sc.geometry.d_v = r.f64();
    sc.delay_spread_s = r.f64();
    sc.delay_scaling = r.f64();
    sc.angle_spread_deg = r.f64();
    sc.cluster_shadowing_db = r.f64();
    sc.ray_delay_jitter_s = r.f64();
    sc.seed = r.u64();
    const auto count = r.u64();
    try {
        sc.validate();
    } catch (const ConfigError& e) {
        throw IoError(r.origin() + ": invalid header: " + e.what());
    }

    const auto get = [&](CsiTensor& t) {
        for (auto& z : t.data) {
            const float re = r.f32();
            const float im = r.f32();
            z = cf32(re, im);
        }
    };
    const auto per_sample = 4 + 8 * static_cast<std::uint64_t>(sc.history + sc.horizon) *
                                    static_cast<std::uint64_t>(sc.num_rb) * static_cast<std::uint64_t>(sc.antennas());
    if (count > r.remaining() / per_sample)
        throw IoError(r.origin() + ": header claims " + std::to_string(count) + " samples, file is too short");
    ds.samples.resize(count);
    const auto pols = static_cast<std::uint64_t>(sc.geometry.polarizations);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto& s = ds.samples[i];
        s.velocity = r.f32();
        s.uplink = CsiTensor(sc.history, sc.num_rb, sc.antennas());
        s.downlink = CsiTensor(sc.horizon, sc.num_rb, sc.antennas());
        get(s.uplink);
        get(s.downlink);
        s.scenario_id = sc.scenario_id;
        s.polarization = static_cast<std::uint32_t>(i % pols);
    }
    if (!r.at_end())
        throw IoError(r.origin() + ": trailing bytes after " + std::to_string(count) + " samples");
    return ds;
}

inline Dataset deserialize(std::vector<unsigned char> bytes)
{
    io::ByteReader r(std::move(bytes));
    return deserialize(r);
}

inline void save_dataset(const Dataset& ds, const std::string& path)
{
    io::ByteWriter w;
    const auto bytes = serialize(ds);
    w.bytes(bytes.data(), bytes.size());
    w.save(path);
}

inline Dataset load_dataset(const std::string& path)
{
    auto r = io::ByteReader::from_file(path);
    return deserialize(r);
}

inline std::uint64_t dataset_hash(const Dataset& ds)
{
    const auto bytes = serialize(ds);
    return fnv1a(bytes.data(), bytes.size());
}

} // namespace llm4cp::chansim

#endif
