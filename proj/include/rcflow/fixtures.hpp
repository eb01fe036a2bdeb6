/*
 * Copyright 2026 The RC-Flow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Parity fixtures: a JSON array of
//   {"shape": [N_r, N_t], "input": <b64>, "t": <float>, "expected": <b64>}
// where each b64 payload is little-endian float64 interleaved (re, im) pairs.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/remove_whitespace.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>

#include "rcflow/binary_io.hpp"
#include "rcflow/core.hpp"
#include "rcflow/prior.hpp"

namespace rcflow
{

inline std::string base64_encode(const binary::Bytes& bytes)
{
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<binary::Bytes::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline binary::Bytes base64_decode(std::string text)
{
    using namespace boost::archive::iterators;
    using It = transform_width<binary_from_base64<remove_whitespace<std::string::const_iterator>>,
                               8, 6>;
    const auto pad = static_cast<std::size_t>(std::count(text.begin(), text.end(), '='));
    std::replace(text.begin(), text.end(), '=', 'A');
    try
    {
        binary::Bytes out(It(text.cbegin()), It(text.cend()));
        out.resize(out.size() - std::min(pad, out.size()));
        return out;
    }
    catch (const std::exception& e)
    {
        throw FormatError(std::string("invalid base64 payload: ") + e.what());
    }
}

inline std::string encode_complex_b64(const ComplexMatrix& m)
{
    binary::Bytes b;
    for (const auto& z : m.data())
    {
        binary::put_f64(b, z.real());
        binary::put_f64(b, z.imag());
    }
    return base64_encode(b);
}

inline ComplexMatrix decode_complex_b64(const std::string& text, std::size_t rows,
                                        std::size_t cols)
{
    const auto bytes = base64_decode(text);
    if (bytes.size() != rows * cols * 16)
    {
        throw FormatError("fixture payload has " + std::to_string(bytes.size())
                          + " bytes, expected " + std::to_string(rows * cols * 16));
    }
    binary::Reader rd(bytes);
    std::vector<cplx> entries(rows * cols);
    for (auto& z : entries)
    {
        const double re = rd.get_f64("fixture entry");
        const double im = rd.get_f64("fixture entry");
        z = cplx{re, im};
    }
    return ComplexMatrix(rows, cols, std::move(entries));
}

struct ParityFixture
{
    ComplexMatrix input;
    double t = 0.0;
    ComplexMatrix expected;
};

inline std::vector<ParityFixture> parse_fixtures(const nlohmann::json& j)
{
    if (!j.is_array())
    {
        throw FormatError("fixture file must hold a JSON array");
    }
    std::vector<ParityFixture> out;
    try
    {
        for (const auto& item : j)
        {
            const auto shape = item.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2)
            {
                throw FormatError("fixture shape must be [N_r, N_t]");
            }
            out.push_back({decode_complex_b64(item.at("input").get<std::string>(), shape[0],
                                              shape[1]),
                           item.at("t").get<double>(),
                           decode_complex_b64(item.at("expected").get<std::string>(),
                                              shape[0], shape[1])});
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("fixture file: ") + e.what());
    }
    return out;
}

inline std::vector<ParityFixture> load_fixtures(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IoError("cannot open fixture file " + path.string());
    }
    try
    {
        return parse_fixtures(nlohmann::json::parse(in));
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("fixture file is not valid JSON: ") + e.what());
    }
}

inline nlohmann::json fixture_to_json(const ParityFixture& f)
{
    return {{"shape", {f.input.rows(), f.input.cols()}},
            {"input", encode_complex_b64(f.input)},
            {"t", f.t},
            {"expected", encode_complex_b64(f.expected)}};
}

struct ParityResult
{
    std::size_t count = 0;
    double max_abs_error = 0.0;
};

template <VelocityField F>
ParityResult check_parity(const F& field, const std::vector<ParityFixture>& fixtures)
{
    ParityResult r{fixtures.size(), 0.0};
    for (const auto& fx : fixtures)
    {
        const auto v = field.eval(fx.input, fx.t);
        if (!v.same_shape(fx.expected))
        {
            throw DimensionError("parity: output shape differs from fixture");
        }
        for (std::size_t k = 0; k < v.size(); ++k)
        {
            const auto d = v.data()[k] - fx.expected.data()[k];
            r.max_abs_error =
                std::max({r.max_abs_error, std::abs(d.real()), std::abs(d.imag())});
        }
    }
    return r;
}

}  // namespace rcflow
