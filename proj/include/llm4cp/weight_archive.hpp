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

#ifndef LLM4CP_WEIGHT_ARCHIVE_HPP
#define LLM4CP_WEIGHT_ARCHIVE_HPP

#include "binary_io.hpp"
#include "nn/param_store.hpp"

#include <unordered_map>

// Named-tensor archive (little-endian):
//
//   "CPWT"  u16 version  u32 record_count
//   per record: u32 name_len, utf8 name, u8 dtype, u8 rank, u64 dims[rank],
//               row-major payload (product(dims) * dtype size bytes)
//
// dtype codes: 0 = f32, 1 = f64, 2 = u64.

namespace llm4cp {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, U64 = 2 };

inline std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

struct ArchiveRecord {
    std::string name;
    DType dtype = DType::F32;
    std::vector<std::uint64_t> dims;
    std::vector<unsigned char> payload; // little-endian, row-major

    std::uint64_t elements() const
    {
        std::uint64_t n = 1;
        for (auto d : dims)
            n *= d;
        return n;
    }
};

class WeightArchive {
public:
    static constexpr std::uint16_t kVersion = 1;

    const std::vector<ArchiveRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const ArchiveRecord& at(const std::string& name) const
    {
        auto it = index_.find(name);
        if (it == index_.end())
            throw IoError("archive has no tensor '" + name + "'");
        return records_[it->second];
    }

    void add(ArchiveRecord rec)
    {
        if (index_.count(rec.name))
            throw IoError("duplicate archive tensor '" + rec.name + "'");
        if (rec.payload.size() != rec.elements() * dtype_size(rec.dtype))
            throw IoError("payload size mismatch for '" + rec.name + "'");
        index_[rec.name] = records_.size();
        records_.push_back(std::move(rec));
    }

    template <class T>
    void put_matrix(const std::string& name, const Mat<T>& m, DType dtype = std::is_same_v<T, double> ? DType::F64 : DType::F32)
    {
        ArchiveRecord rec;
        rec.name = name;
        rec.dtype = dtype;
        rec.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
        io::ByteWriter w;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (dtype == DType::F32)
                    w.f32(static_cast<float>(m(i, j)));
                else
                    w.f64(static_cast<double>(m(i, j)));
            }
        rec.payload = w.buffer();
        add(std::move(rec));
    }

    void put_scalar(const std::string& name, double v)
    {
        Mat<double> m(1, 1);
        m(0, 0) = v;
        put_matrix(name, m, DType::F64);
    }

    void put_u64(const std::string& name, const std::vector<std::uint64_t>& values)
    {
        ArchiveRecord rec;
        rec.name = name;
        rec.dtype = DType::U64;
        rec.dims = {static_cast<std::uint64_t>(values.size())};
        io::ByteWriter w;
        for (auto v : values)
            w.u64(v);
        rec.payload = w.buffer();
        add(std::move(rec));
    }

    // Reads a rank-1 or rank-2 float tensor as a matrix; rank-1 becomes a column.
    template <class T>
    Mat<T> get_matrix(const std::string& name) const
    {
        const auto& rec = at(name);
        if (rec.dtype == DType::U64)
            throw IoError("tensor '" + name + "' is not floating point");
        if (rec.dims.empty() || rec.dims.size() > 2)
            throw IoError("tensor '" + name + "' has unsupported rank " + std::to_string(rec.dims.size()));
        const auto rows = static_cast<Eigen::Index>(rec.dims[0]);
        const auto cols = rec.dims.size() == 2 ? static_cast<Eigen::Index>(rec.dims[1]) : 1;
        Mat<T> m(rows, cols);
        io::ByteReader r(rec.payload, name);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                m(i, j) = rec.dtype == DType::F32 ? static_cast<T>(r.f32()) : static_cast<T>(r.f64());
        return m;
    }

    double get_scalar(const std::string& name) const { return get_matrix<double>(name)(0, 0); }

    std::vector<std::uint64_t> get_u64(const std::string& name) const
    {
        const auto& rec = at(name);
        if (rec.dtype != DType::U64)
            throw IoError("tensor '" + name + "' is not u64");
        io::ByteReader r(rec.payload, name);
        std::vector<std::uint64_t> v(rec.elements());
        for (auto& x : v)
            x = r.u64();
        return v;
    }

    std::vector<unsigned char> serialize() const
    {
        io::ByteWriter w;
        w.tag("CPWT");
        w.u16(kVersion);
        w.u32(static_cast<std::uint32_t>(records_.size()));
        for (const auto& rec : records_) {
            w.str(rec.name);
            w.u8(static_cast<std::uint8_t>(rec.dtype));
            w.u8(static_cast<std::uint8_t>(rec.dims.size()));
            for (auto d : rec.dims)
                w.u64(d);
            w.bytes(rec.payload.data(), rec.payload.size());
        }
        return w.buffer();
    }

    static WeightArchive deserialize(io::ByteReader& r)
    {
        WeightArchive a;
        r.expect_tag("CPWT");
        const auto version = r.u16();
        if (version != kVersion)
            throw IoError(r.origin() + ": unsupported archive version " + std::to_string(version));
        const auto count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            ArchiveRecord rec;
            rec.name = r.str();
            const auto dt = r.u8();
            if (dt > 2)
                throw IoError(r.origin() + ": bad dtype code for '" + rec.name + "'");
            rec.dtype = static_cast<DType>(dt);
            const auto rank = r.u8();
            rec.dims.resize(rank);
            for (auto& d : rec.dims)
                d = r.u64();
            const auto n = rec.elements() * dtype_size(rec.dtype);
            rec.payload.resize(n);
            for (auto& b : rec.payload)
                b = r.u8();
            a.add(std::move(rec));
        }
        if (!r.at_end())
            throw IoError(r.origin() + ": trailing bytes after archive records");
        return a;
    }

    void save(const std::string& path) const
    {
        io::ByteWriter w;
        const auto bytes = serialize();
        w.bytes(bytes.data(), bytes.size());
        w.save(path);
    }

    static WeightArchive load(const std::string& path)
    {
        auto r = io::ByteReader::from_file(path);
        return deserialize(r);
    }

private:
    std::vector<ArchiveRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Every tensor of the store, under its own name, in store order.
template <class T>
void store_to_archive(const nn::ParamStore<T>& store, WeightArchive& a, const std::string& prefix = "")
{
    for (std::size_t i = 0; i < store.size(); ++i)
        a.put_matrix(prefix + store[i].name, store[i].value);
}

// Fills every tensor of the store from the archive. Missing or mis-shaped
// tensors are collected and reported together.
template <class T>
void archive_to_store(const WeightArchive& a, nn::ParamStore<T>& store, const std::string& prefix = "")
{
    std::string missing, mismatched;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& t = store[i];
        const auto name = prefix + t.name;
        if (!a.contains(name)) {
            missing += (missing.empty() ? "" : ", ") + name;
            continue;
        }
        Mat<T> m = a.get_matrix<T>(name);
        if (m.rows() != t.value.rows() || m.cols() != t.value.cols()) {
            mismatched += (mismatched.empty() ? "" : ", ") + name + " (archive " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " + std::to_string(t.value.rows()) + "x" +
                          std::to_string(t.value.cols()) + ")";
            continue;
        }
        t.value = std::move(m);
    }
    if (!missing.empty() || !mismatched.empty()) {
        std::string msg = "archive does not match model";
        if (!missing.empty())
            msg += "; missing: " + missing;
        if (!mismatched.empty())
            msg += "; shape mismatch: " + mismatched;
        throw IoError(msg);
    }
}

} // namespace llm4cp

#endif
