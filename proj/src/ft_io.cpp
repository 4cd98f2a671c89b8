/*
 Copyright 2026 The fthjb Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/core.h>

#include "fthjb/funtrain.hpp"

namespace fthjb {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'R', 'N'};
// Guards against absurd sizes in corrupted headers.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(buf, buf + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw FormatError("truncated function train data");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(buf, buf + sizeof(T));
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

std::uint64_t get_count(std::istream& in, const char* what) {
    const auto v = get<std::uint64_t>(in);
    if (v == 0 || v > kMaxCount) {
        throw FormatError(fmt::format("invalid {} {}", what, v));
    }
    return v;
}

}  // namespace

void write_ft(std::ostream& out, const FunctionTrain& f) {
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kFtFormatVersion);
    put<std::uint64_t>(out, f.dim());
    for (const auto& core : f.cores()) {
        put<std::uint64_t>(out, core.nodes());
        for (double x : core.grid().nodes()) put<double>(out, x);
    }
    for (std::size_t r : f.ranks()) put<std::uint64_t>(out, r);
    for (const auto& core : f.cores()) {
        for (double c : core.coeffs()) put<double>(out, c);
    }
    if (!out) {
        throw FormatError("failed writing function train");
    }
}

FunctionTrain read_ft(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad magic: not a function train file");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kFtFormatVersion) {
        throw FormatError(fmt::format("unsupported format version {}", version));
    }
    const auto d = get_count(in, "dimension");
    std::vector<NodalGrid1D> grids;
    grids.reserve(d);
    for (std::uint64_t k = 0; k < d; ++k) {
        const auto n = get_count(in, "node count");
        std::vector<double> nodes(n);
        for (auto& x : nodes) x = get<double>(in);
        try {
            grids.emplace_back(std::move(nodes));
        } catch (const ShapeError& e) {
            throw FormatError(e.what());
        }
    }
    std::vector<std::size_t> ranks(d + 1);
    for (auto& r : ranks) r = get_count(in, "rank");
    std::vector<FtCore> cores;
    cores.reserve(d);
    for (std::uint64_t k = 0; k < d; ++k) {
        const std::uint64_t count = ranks[k] * ranks[k + 1] * grids[k].size();
        if (count > kMaxCount) {
            throw FormatError("core too large");
        }
        std::vector<double> coeffs(count);
        for (auto& c : coeffs) c = get<double>(in);
        cores.emplace_back(grids[k], ranks[k], ranks[k + 1], std::move(coeffs));
    }
    try {
        return FunctionTrain(std::move(cores));
    } catch (const ShapeError& e) {
        throw FormatError(e.what());
    }
}

void save_ft(const std::string& path, const FunctionTrain& f) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError(fmt::format("cannot open {} for writing", path));
    }
    write_ft(out, f);
}

FunctionTrain load_ft(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(fmt::format("cannot open {}", path));
    }
    return read_ft(in);
}

}  // namespace fthjb
