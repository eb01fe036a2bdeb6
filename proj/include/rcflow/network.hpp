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

/*
 * Time-conditioned network velocity field.
 *
 * A weight file carries the whole layer graph in its JSON header, and this
 * header is a small interpreter over a fixed kernel set. File layout:
 *
 *   "RCFLOWNN" | u8 version (=1) | u32 LE header length | UTF-8 JSON header |
 *   tensor blob (little-endian float32, row-major)
 *
 * Header:
 *   {
 *     "format": "rcflow-nn",
 *     "input_shape": [2, N_r, N_t],      // real / imaginary planes
 *     "time_embed_dim": d,               // even
 *     "time_scale": 1.0,                 // optional, embedding sees t * scale
 *     "output": "<layer name>",          // optional, defaults to last layer
 *     "checksum": "fnv1a64:<16 hex>",    // optional, over the blob
 *     "graph": [ {"kind", "name", "inputs": [...], ...hyperparams}, ... ],
 *     "tensors": [ {"name", "shape", "offset", "dtype": "f32"}, ... ]
 *   }
 *
 * Graph values are named. "input" is the 2 x N_r x N_t state and "temb" the
 * sinusoidal embedding [sin(t w_k) ..., cos(t w_k) ...] with
 * w_k = 10000^(-2k/d). Layer kinds:
 *
 *   conv2d       in_channels, out_channels, kernel (1|3), stride (1|2),
 *                weight (out, in, k, k), bias (out) optional; zero padding k/2
 *   downsample   conv2d with kernel 3, stride 2
 *   group_norm   channels, groups, eps (default 1e-5), weight, bias
 *   silu, gelu   elementwise (gelu is the exact erf form)
 *   linear       in_features, out_features, weight (out, in), bias (out)
 *   scale_shift  inputs [x (C,H,W), e (2C)] -> x * (1 + e[:C]) + e[C:]
 *   upsample     nearest-neighbour 2x
 *   concat       channel concatenation of all inputs
 *   add          elementwise sum of two inputs
 *
 * Each descriptor may carry "out_shape"; validation checks it.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcflow/binary_io.hpp"
#include "rcflow/core.hpp"
#include "rcflow/prior.hpp"

namespace rcflow
{

class UnsupportedLayerError : public FormatError
{
   public:
    using FormatError::FormatError;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        os << (i ? "," : "") << s[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t numel(const Shape& s)
{
    std::size_t n = 1;
    for (auto d : s)
    {
        n *= d;
    }
    return n;
}

struct Tensor
{
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), 0.0) {}
};

enum class LayerKind
{
    Conv2d,
    Downsample,
    GroupNorm,
    Silu,
    Gelu,
    Linear,
    ScaleShift,
    Upsample,
    Concat,
    Add,
};

inline LayerKind parse_layer_kind(const std::string& s)
{
    static const std::map<std::string, LayerKind> kinds = {
        {"conv2d", LayerKind::Conv2d},       {"downsample", LayerKind::Downsample},
        {"group_norm", LayerKind::GroupNorm}, {"silu", LayerKind::Silu},
        {"gelu", LayerKind::Gelu},           {"linear", LayerKind::Linear},
        {"scale_shift", LayerKind::ScaleShift}, {"upsample", LayerKind::Upsample},
        {"concat", LayerKind::Concat},       {"add", LayerKind::Add},
    };
    const auto it = kinds.find(s);
    if (it == kinds.end())
    {
        throw UnsupportedLayerError("unsupported layer kind '" + s + "'");
    }
    return it->second;
}

struct Layer
{
    LayerKind kind{};
    std::string name;
    std::vector<std::string> inputs;
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t groups = 1;
    double eps = 1e-5;
    std::string weight;
    std::string bias;
    std::optional<Shape> out_shape;
};

namespace detail
{

inline Layer parse_layer(const nlohmann::json& j)
{
    Layer l;
    l.name = j.at("name").get<std::string>();
    l.kind = parse_layer_kind(j.at("kind").get<std::string>());
    l.inputs = j.at("inputs").get<std::vector<std::string>>();
    auto size = [&](const char* key) { return j.at(key).get<std::size_t>(); };
    switch (l.kind)
    {
        case LayerKind::Conv2d:
        case LayerKind::Downsample:
            l.in_ch = size("in_channels");
            l.out_ch = size("out_channels");
            l.kernel = l.kind == LayerKind::Downsample ? 3 : size("kernel");
            l.stride = l.kind == LayerKind::Downsample ? 2 : j.value("stride", std::size_t{1});
            l.weight = j.at("weight").get<std::string>();
            l.bias = j.value("bias", std::string{});
            if (l.kernel != 1 && l.kernel != 3)
            {
                throw UnsupportedLayerError("layer '" + l.name + "': kernel "
                                            + std::to_string(l.kernel) + " not supported");
            }
            if (l.stride != 1 && l.stride != 2)
            {
                throw UnsupportedLayerError("layer '" + l.name + "': stride "
                                            + std::to_string(l.stride) + " not supported");
            }
            break;
        case LayerKind::GroupNorm:
            l.in_ch = size("channels");
            l.groups = size("groups");
            l.eps = j.value("eps", 1e-5);
            l.weight = j.at("weight").get<std::string>();
            l.bias = j.at("bias").get<std::string>();
            break;
        case LayerKind::Linear:
            l.in_ch = size("in_features");
            l.out_ch = size("out_features");
            l.weight = j.at("weight").get<std::string>();
            l.bias = j.value("bias", std::string{});
            break;
        default:
            break;
    }
    if (j.contains("out_shape"))
    {
        l.out_shape = j.at("out_shape").get<Shape>();
    }
    return l;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, std::size_t stride)
{
    const std::size_t cin = x.shape[0], hin = x.shape[1], win = x.shape[2];
    const std::size_t cout = w.shape[0], k = w.shape[2];
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t hout = (hin + 2 * (k / 2) - k) / stride + 1;
    const std::size_t wout = (win + 2 * (k / 2) - k) / stride + 1;
    Tensor y({cout, hout, wout});
    for (std::size_t o = 0; o < cout; ++o)
    {
        const double bias = b ? b->data[o] : 0.0;
        for (std::size_t r = 0; r < hout; ++r)
        {
            for (std::size_t c = 0; c < wout; ++c)
            {
                double acc = bias;
                for (std::size_t i = 0; i < cin; ++i)
                {
                    for (std::size_t kr = 0; kr < k; ++kr)
                    {
                        const auto rr = static_cast<std::ptrdiff_t>(r * stride + kr) - pad;
                        if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(hin))
                        {
                            continue;
                        }
                        for (std::size_t kc = 0; kc < k; ++kc)
                        {
                            const auto cc =
                                static_cast<std::ptrdiff_t>(c * stride + kc) - pad;
                            if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(win))
                            {
                                continue;
                            }
                            acc += w.data[((o * cin + i) * k + kr) * k + kc]
                                   * x.data[(i * hin + static_cast<std::size_t>(rr)) * win
                                            + static_cast<std::size_t>(cc)];
                        }
                    }
                }
                y.data[(o * hout + r) * wout + c] = acc;
            }
        }
    }
    return y;
}

}  // namespace detail

/// Weight-file contents before validation: header JSON plus float32 blob.
struct NetworkFile
{
    nlohmann::json header;
    binary::Bytes blob;
};

class NetworkField
{
   public:
    /// Parses and validates; every intermediate shape is computed here so
    /// eval never discovers a shape error mid-graph for a valid input.
    explicit NetworkField(const NetworkFile& file)
    {
        const auto& h = file.header;
        try
        {
            if (h.value("format", std::string{"rcflow-nn"}) != "rcflow-nn")
            {
                throw FormatError("weight header: format is not 'rcflow-nn'");
            }
            input_shape_ = h.at("input_shape").get<Shape>();
            time_embed_dim_ = h.at("time_embed_dim").get<std::size_t>();
            time_scale_ = h.value("time_scale", 1.0);
            for (const auto& lj : h.at("graph"))
            {
                layers_.push_back(detail::parse_layer(lj));
            }
            output_ = h.contains("output") ? h.at("output").get<std::string>()
                      : layers_.empty()    ? std::string{"input"}
                                           : layers_.back().name;
            load_tensors(h.at("tensors"), file.blob);
            if (h.contains("checksum"))
            {
                check_checksum(h.at("checksum").get<std::string>(), file.blob);
            }
        }
        catch (const nlohmann::json::exception& e)
        {
            throw FormatError(std::string("weight header: ") + e.what());
        }
        validate();
    }

    const Shape& input_shape() const noexcept { return input_shape_; }
    std::size_t time_embed_dim() const noexcept { return time_embed_dim_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const std::map<std::string, Tensor>& tensors() const noexcept { return tensors_; }

    std::vector<double> time_embedding(double t) const
    {
        const std::size_t half = time_embed_dim_ / 2;
        std::vector<double> e(time_embed_dim_);
        const double ts = t * time_scale_;
        for (std::size_t k = 0; k < half; ++k)
        {
            const double freq =
                std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
            e[k] = std::sin(ts * freq);
            e[half + k] = std::cos(ts * freq);
        }
        return e;
    }

    ComplexMatrix eval(const ComplexMatrix& h, double t) const
    {
        check_time(t, "NetworkField::eval");
        if (h.rows() != input_shape_[1] || h.cols() != input_shape_[2])
        {
            throw DimensionError("NetworkField::eval: state is "
                                 + std::to_string(h.rows()) + "x" + std::to_string(h.cols())
                                 + ", network expects " + shape_str(input_shape_));
        }
        std::unordered_map<std::string, Tensor> values;
        Tensor in(input_shape_);
        const std::size_t plane = h.size();
        for (std::size_t k = 0; k < plane; ++k)
        {
            in.data[k] = h.data()[k].real();
            in.data[plane + k] = h.data()[k].imag();
        }
        values.emplace("input", std::move(in));
        Tensor temb({time_embed_dim_});
        temb.data = time_embedding(t);
        values.emplace("temb", std::move(temb));

        for (const auto& layer : layers_)
        {
            values[layer.name] = apply(layer, values);
        }
        const Tensor& out = values.at(output_);
        std::vector<cplx> entries(plane);
        for (std::size_t k = 0; k < plane; ++k)
        {
            entries[k] = cplx{out.data[k], out.data[plane + k]};
        }
        ComplexMatrix v(h.rows(), h.cols(), std::move(entries));
        return v;
    }

   private:
    void load_tensors(const nlohmann::json& list, const binary::Bytes& blob)
    {
        for (const auto& tj : list)
        {
            const auto name = tj.at("name").get<std::string>();
            const auto shape = tj.at("shape").get<Shape>();
            const auto offset = tj.at("offset").get<std::size_t>();
            const auto dtype = tj.value("dtype", std::string{"f32"});
            if (dtype != "f32")
            {
                throw FormatError("tensor '" + name + "': unsupported dtype '" + dtype + "'");
            }
            const std::size_t n = numel(shape);
            if (offset > blob.size() || blob.size() - offset < 4 * n)
            {
                throw FormatError("tensor '" + name + "' is truncated: needs bytes ["
                                  + std::to_string(offset) + ", "
                                  + std::to_string(offset + 4 * n) + ") but blob has "
                                  + std::to_string(blob.size()));
            }
            Tensor t(shape);
            for (std::size_t i = 0; i < n; ++i)
            {
                std::uint32_t bits = 0;
                for (std::size_t b = 0; b < 4; ++b)
                {
                    bits |= static_cast<std::uint32_t>(blob[offset + 4 * i + b]) << (8 * b);
                }
                t.data[i] = static_cast<double>(std::bit_cast<float>(bits));
            }
            if (!tensors_.emplace(name, std::move(t)).second)
            {
                throw FormatError("duplicate tensor '" + name + "'");
            }
        }
    }

    static void check_checksum(const std::string& text, const binary::Bytes& blob)
    {
        const std::string prefix = "fnv1a64:";
        if (text.rfind(prefix, 0) != 0)
        {
            throw FormatError("checksum must start with 'fnv1a64:'");
        }
        const auto expected = std::stoull(text.substr(prefix.size()), nullptr, 16);
        const auto actual = binary::fnv1a64(blob.data(), blob.size());
        if (expected != actual)
        {
            throw FormatError("tensor blob checksum mismatch");
        }
    }

    const Tensor& tensor(const std::string& name, const Shape& expect,
                         const Layer& layer) const
    {
        const auto it = tensors_.find(name);
        if (it == tensors_.end())
        {
            throw FormatError("layer '" + layer.name + "' references missing tensor '" + name
                              + "'");
        }
        if (it->second.shape != expect)
        {
            throw FormatError("tensor '" + name + "' has shape " + shape_str(it->second.shape)
                              + ", layer '" + layer.name + "' expects " + shape_str(expect));
        }
        return it->second;
    }

    Shape infer(const Layer& l, const std::vector<Shape>& in) const
    {
        auto fail = [&](const std::string& why) -> Shape {
            throw FormatError("layer '" + l.name + "': " + why);
        };
        auto need_inputs = [&](std::size_t n) {
            if (in.size() != n)
            {
                fail("expects " + std::to_string(n) + " input(s), got "
                     + std::to_string(in.size()));
            }
        };
        switch (l.kind)
        {
            case LayerKind::Conv2d:
            case LayerKind::Downsample:
            {
                need_inputs(1);
                if (in[0].size() != 3 || in[0][0] != l.in_ch)
                {
                    fail("input " + shape_str(in[0]) + " does not have "
                         + std::to_string(l.in_ch) + " channels");
                }
                tensor(l.weight, {l.out_ch, l.in_ch, l.kernel, l.kernel}, l);
                if (!l.bias.empty())
                {
                    tensor(l.bias, {l.out_ch}, l);
                }
                const std::size_t pad = l.kernel / 2;
                return {l.out_ch, (in[0][1] + 2 * pad - l.kernel) / l.stride + 1,
                        (in[0][2] + 2 * pad - l.kernel) / l.stride + 1};
            }
            case LayerKind::GroupNorm:
                need_inputs(1);
                if (in[0].size() != 3 || in[0][0] != l.in_ch)
                {
                    fail("input " + shape_str(in[0]) + " does not have "
                         + std::to_string(l.in_ch) + " channels");
                }
                if (l.groups == 0 || l.in_ch % l.groups != 0)
                {
                    fail("channels not divisible by groups");
                }
                tensor(l.weight, {l.in_ch}, l);
                tensor(l.bias, {l.in_ch}, l);
                return in[0];
            case LayerKind::Silu:
            case LayerKind::Gelu:
                need_inputs(1);
                return in[0];
            case LayerKind::Linear:
                need_inputs(1);
                if (in[0] != Shape{l.in_ch})
                {
                    fail("input " + shape_str(in[0]) + " is not a vector of "
                         + std::to_string(l.in_ch));
                }
                tensor(l.weight, {l.out_ch, l.in_ch}, l);
                if (!l.bias.empty())
                {
                    tensor(l.bias, {l.out_ch}, l);
                }
                return {l.out_ch};
            case LayerKind::ScaleShift:
                need_inputs(2);
                if (in[0].size() != 3 || in[1] != Shape{2 * in[0][0]})
                {
                    fail("needs (C,H,W) and (2C) inputs, got " + shape_str(in[0]) + " and "
                         + shape_str(in[1]));
                }
                return in[0];
            case LayerKind::Upsample:
                need_inputs(1);
                if (in[0].size() != 3)
                {
                    fail("input is not a feature map");
                }
                return {in[0][0], 2 * in[0][1], 2 * in[0][2]};
            case LayerKind::Concat:
            {
                if (in.empty())
                {
                    fail("needs at least one input");
                }
                Shape out = in[0];
                for (std::size_t k = 1; k < in.size(); ++k)
                {
                    if (in[k].size() != 3 || in[k][1] != out[1] || in[k][2] != out[2])
                    {
                        fail("spatial shapes " + shape_str(out) + " and " + shape_str(in[k])
                             + " differ");
                    }
                    out[0] += in[k][0];
                }
                return out;
            }
            case LayerKind::Add:
                need_inputs(2);
                if (in[0] != in[1])
                {
                    fail("shapes " + shape_str(in[0]) + " and " + shape_str(in[1])
                         + " differ");
                }
                return in[0];
        }
        return fail("unknown kind");
    }

    void validate()
    {
        if (input_shape_.size() != 3 || input_shape_[0] != 2 || input_shape_[1] == 0
            || input_shape_[2] == 0)
        {
            throw FormatError("input_shape must be [2, N_r, N_t], got "
                              + shape_str(input_shape_));
        }
        if (time_embed_dim_ == 0 || time_embed_dim_ % 2 != 0)
        {
            throw FormatError("time_embed_dim must be positive and even");
        }
        std::map<std::string, Shape> shapes{{"input", input_shape_},
                                            {"temb", {time_embed_dim_}}};
        for (const auto& l : layers_)
        {
            if (shapes.contains(l.name))
            {
                throw FormatError("duplicate value name '" + l.name + "'");
            }
            std::vector<Shape> in;
            for (const auto& src : l.inputs)
            {
                const auto it = shapes.find(src);
                if (it == shapes.end())
                {
                    throw FormatError("layer '" + l.name + "' reads undefined value '" + src
                                      + "'");
                }
                in.push_back(it->second);
            }
            Shape out = infer(l, in);
            if (l.out_shape && *l.out_shape != out)
            {
                throw FormatError("layer '" + l.name + "' declares out_shape "
                                  + shape_str(*l.out_shape) + " but computes "
                                  + shape_str(out));
            }
            shapes.emplace(l.name, std::move(out));
        }
        const auto it = shapes.find(output_);
        if (it == shapes.end())
        {
            throw FormatError("output '" + output_ + "' is not a graph value");
        }
        if (it->second != input_shape_)
        {
            throw FormatError("output shape " + shape_str(it->second)
                              + " differs from input shape " + shape_str(input_shape_));
        }
    }

    Tensor apply(const Layer& l, const std::unordered_map<std::string, Tensor>& values) const
    {
        auto arg = [&](std::size_t k) -> const Tensor& { return values.at(l.inputs[k]); };
        switch (l.kind)
        {
            case LayerKind::Conv2d:
            case LayerKind::Downsample:
                return detail::conv2d(arg(0), tensors_.at(l.weight),
                                      l.bias.empty() ? nullptr : &tensors_.at(l.bias),
                                      l.stride);
            case LayerKind::GroupNorm:
            {
                const Tensor& x = arg(0);
                const auto& gamma = tensors_.at(l.weight).data;
                const auto& beta = tensors_.at(l.bias).data;
                Tensor y(x.shape);
                const std::size_t per_ch = x.shape[1] * x.shape[2];
                const std::size_t ch_per_group = l.in_ch / l.groups;
                const std::size_t count = ch_per_group * per_ch;
                for (std::size_t g = 0; g < l.groups; ++g)
                {
                    const std::size_t start = g * count;
                    double mean = 0.0;
                    for (std::size_t k = 0; k < count; ++k)
                    {
                        mean += x.data[start + k];
                    }
                    mean /= static_cast<double>(count);
                    double var = 0.0;
                    for (std::size_t k = 0; k < count; ++k)
                    {
                        const double d = x.data[start + k] - mean;
                        var += d * d;
                    }
                    var /= static_cast<double>(count);
                    const double inv = 1.0 / std::sqrt(var + l.eps);
                    for (std::size_t k = 0; k < count; ++k)
                    {
                        const std::size_t ch = g * ch_per_group + k / per_ch;
                        y.data[start + k] = (x.data[start + k] - mean) * inv * gamma[ch] + beta[ch];
                    }
                }
                return y;
            }
            case LayerKind::Silu:
            case LayerKind::Gelu:
            {
                Tensor y = arg(0);
                for (auto& v : y.data)
                {
                    v = l.kind == LayerKind::Silu ? detail::silu(v) : detail::gelu(v);
                }
                return y;
            }
            case LayerKind::Linear:
            {
                const Tensor& x = arg(0);
                const auto& w = tensors_.at(l.weight).data;
                Tensor y({l.out_ch});
                for (std::size_t o = 0; o < l.out_ch; ++o)
                {
                    double acc = l.bias.empty() ? 0.0 : tensors_.at(l.bias).data[o];
                    for (std::size_t i = 0; i < l.in_ch; ++i)
                    {
                        acc += w[o * l.in_ch + i] * x.data[i];
                    }
                    y.data[o] = acc;
                }
                return y;
            }
            case LayerKind::ScaleShift:
            {
                const Tensor& x = arg(0);
                const Tensor& e = arg(1);
                Tensor y = x;
                const std::size_t c = x.shape[0];
                const std::size_t per_ch = x.shape[1] * x.shape[2];
                for (std::size_t ch = 0; ch < c; ++ch)
                {
                    const double scale = 1.0 + e.data[ch];
                    const double shift = e.data[c + ch];
                    for (std::size_t k = 0; k < per_ch; ++k)
                    {
                        auto& v = y.data[ch * per_ch + k];
                        v = v * scale + shift;
                    }
                }
                return y;
            }
            case LayerKind::Upsample:
            {
                const Tensor& x = arg(0);
                const std::size_t c = x.shape[0], hin = x.shape[1], win = x.shape[2];
                Tensor y({c, 2 * hin, 2 * win});
                for (std::size_t ch = 0; ch < c; ++ch)
                {
                    for (std::size_t r = 0; r < 2 * hin; ++r)
                    {
                        for (std::size_t col = 0; col < 2 * win; ++col)
                        {
                            y.data[(ch * 2 * hin + r) * 2 * win + col] =
                                x.data[(ch * hin + r / 2) * win + col / 2];
                        }
                    }
                }
                return y;
            }
            case LayerKind::Concat:
            {
                Shape s = arg(0).shape;
                s[0] = 0;
                for (std::size_t k = 0; k < l.inputs.size(); ++k)
                {
                    s[0] += arg(k).shape[0];
                }
                Tensor y(s);
                std::size_t at = 0;
                for (std::size_t k = 0; k < l.inputs.size(); ++k)
                {
                    const auto& d = arg(k).data;
                    std::copy(d.begin(), d.end(), y.data.begin() + static_cast<std::ptrdiff_t>(at));
                    at += d.size();
                }
                return y;
            }
            case LayerKind::Add:
            {
                Tensor y = arg(0);
                const auto& b = arg(1).data;
                for (std::size_t k = 0; k < y.data.size(); ++k)
                {
                    y.data[k] += b[k];
                }
                return y;
            }
        }
        throw FormatError("layer '" + l.name + "': unknown kind");
    }

    Shape input_shape_;
    std::size_t time_embed_dim_ = 0;
    double time_scale_ = 1.0;
    std::string output_;
    std::vector<Layer> layers_;
    std::map<std::string, Tensor> tensors_;
};

static_assert(VelocityField<NetworkField>);

inline constexpr char kNetworkMagic[8] = {'R', 'C', 'F', 'L', 'O', 'W', 'N', 'N'};
inline constexpr std::uint8_t kNetworkVersion = 1;

inline NetworkFile decode_network_file(const binary::Bytes& bytes)
{
    binary::Reader rd(bytes);
    rd.need(sizeof(kNetworkMagic), "weight-file magic");
    if (std::memcmp(rd.cursor(), kNetworkMagic, sizeof(kNetworkMagic)) != 0)
    {
        throw FormatError("not an RC-Flow weight file (bad magic)");
    }
    rd.skip(sizeof(kNetworkMagic), "weight-file magic");
    const auto version = rd.get_uint<std::uint8_t>("weight-file version");
    if (version != kNetworkVersion)
    {
        throw FormatError("weight-file version mismatch: file has " + std::to_string(version)
                          + ", expected " + std::to_string(kNetworkVersion));
    }
    const auto len = rd.get_uint<std::uint32_t>("weight-file header length");
    NetworkFile f;
    try
    {
        f.header = nlohmann::json::parse(rd.get_string(len, "weight-file header"));
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("weight-file header is not valid JSON: ") + e.what());
    }
    f.blob.assign(rd.cursor(), rd.cursor() + rd.remaining());
    return f;
}

inline binary::Bytes encode_network_file(const NetworkFile& f)
{
    binary::Bytes out(std::begin(kNetworkMagic), std::end(kNetworkMagic));
    out.push_back(kNetworkVersion);
    const auto text = f.header.dump();
    binary::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    binary::put_bytes(out, text);
    out.insert(out.end(), f.blob.begin(), f.blob.end());
    return out;
}

/// Appends a float32 tensor to `file.blob` and registers it in the header.
inline void add_tensor(NetworkFile& file, const std::string& name, const Shape& shape,
                       const std::vector<double>& values)
{
    require(values.size() == numel(shape), "add_tensor: value count does not match shape");
    auto& list = file.header["tensors"];
    if (list.is_null())
    {
        list = nlohmann::json::array();
    }
    list.push_back({{"name", name}, {"shape", shape}, {"offset", file.blob.size()},
                    {"dtype", "f32"}});
    for (const double v : values)
    {
        binary::put_f32(file.blob, static_cast<float>(v));
    }
}

inline void stamp_checksum(NetworkFile& file)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(
                      binary::fnv1a64(file.blob.data(), file.blob.size())));
    file.header["checksum"] = std::string("fnv1a64:") + buf;
}

inline NetworkField load_network(const std::filesystem::path& path)
{
    return NetworkField(decode_network_file(binary::read_file(path)));
}

inline void save_network_file(const NetworkFile& f, const std::filesystem::path& path)
{
    binary::write_file(path, encode_network_file(f));
}

}  // namespace rcflow
