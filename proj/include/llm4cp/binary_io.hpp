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

#ifndef LLM4CP_BINARY_IO_HPP
#define LLM4CP_BINARY_IO_HPP

#include "common.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace llm4cp::io {

// Little-endian byte buffer writer, independent of host byte order.
class ByteWriter {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* c = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void tag(std::string_view magic) { bytes(magic.data(), magic.size()); }

    template <class U>
    void uint(U v)
    {
        for (std::size_t i = 0; i < sizeof(U); ++i)
            buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
    void u8(std::uint8_t v) { uint(v); }
    void u16(std::uint16_t v) { uint(v); }
    void u32(std::uint32_t v) { uint(v); }
    void u64(std::uint64_t v) { uint(v); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    const std::vector<unsigned char>& buffer() const { return buf_; }

    void save(const std::string& path) const
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError("cannot open '" + path + "' for writing");
        f.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!f)
            throw IoError("write failed for '" + path + "'");
    }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<unsigned char> data, std::string origin = "<memory>")
        : buf_(std::move(data)), origin_(std::move(origin))
    {
    }

    static ByteReader from_file(const std::string& path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw IoError("cannot open '" + path + "' for reading");
        std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path);
    }

    void expect_tag(std::string_view magic)
    {
        need(magic.size());
        if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0)
            throw IoError(origin_ + ": bad magic, expected '" + std::string(magic) + "'");
        pos_ += magic.size();
    }

    template <class U>
    U uint()
    {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<U>(buf_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }
    std::uint8_t u8() { return uint<std::uint8_t>(); }
    std::uint16_t u16() { return uint<std::uint16_t>(); }
    std::uint32_t u32() { return uint<std::uint32_t>(); }
    std::uint64_t u64() { return uint<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str()
    {
        const auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& origin() const { return origin_; }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > buf_.size())
            throw IoError(origin_ + ": truncated file");
    }

    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
    std::string origin_;
};

} // namespace llm4cp::io

#endif
