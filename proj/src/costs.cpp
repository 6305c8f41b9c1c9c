// SPDX-License-Identifier: Apache-2.0

#include "einv/costs.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace einv {

using nlohmann::json;

namespace {

LayerCost params_of(const Layer<float>& l) {
    LayerCost row;
    row.layer = l.spec.index;
    row.kind = l.spec.kind;
    if (l.conv) {
        row.params += l.conv->weights.size();
        if (l.conv->bias) row.params += l.conv->bias->size();
    }
    if (l.bn) {
        row.params += 2 * l.bn->channels();
        row.buffers += 2 * l.bn->channels();
    }
    return row;
}

void sum_rows(CostReport& r) {
    r.total_params = r.total_buffers = r.total_flops = 0;
    for (const auto& row : r.rows) {
        r.total_params += row.params;
        r.total_buffers += row.buffers;
        r.total_flops += row.flops;
    }
}

}  // namespace

double reduction_pct(std::uint64_t base, std::uint64_t pruned) {
    if (base == 0) return 0.0;
    return 100.0 * (static_cast<double>(base) - static_cast<double>(pruned)) / static_cast<double>(base);
}

CostReport param_count(const NetworkGraph& net) {
    CostReport r;
    for (const auto& l : net.layers()) r.rows.push_back(params_of(l));
    sum_rows(r);
    return r;
}

CostReport flops_count(const NetworkGraph& net, const Shape& input_shape) {
    if (input_shape.size() != 3) throw ShapeError("flops_count expects a (c, h, w) input shape");
    if (input_shape[0] != net.input_shape()[0]) throw ShapeError("flops_count: input channel axis 0 mismatch");
    CostReport r;
    r.has_flops = true;
    Shape cur = input_shape;
    for (const auto& l : net.layers()) {
        LayerCost row = params_of(l);
        const auto& s = l.spec;
        std::uint64_t in_hw = cur[1] * cur[2];
        switch (s.kind) {
            case LayerKind::conv:
                cur = {s.out_channels, conv_out_extent(cur[1], s.kernel[0], s.stride[0], s.padding[0], "height"),
                       conv_out_extent(cur[2], s.kernel[1], s.stride[1], s.padding[1], "width")};
                row.flops = 2ull * s.out_channels * s.in_channels * s.kernel[0] * s.kernel[1] * cur[1] * cur[2];
                break;
            case LayerKind::conv_transpose:
                cur = {s.out_channels, conv_transpose_out_extent(cur[1], s.kernel[0], s.stride[0], s.padding[0], "height"),
                       conv_transpose_out_extent(cur[2], s.kernel[1], s.stride[1], s.padding[1], "width")};
                row.flops = 2ull * s.in_channels * s.out_channels * s.kernel[0] * s.kernel[1] * in_hw;
                break;
            case LayerKind::center_crop:
                cur = {cur[0], s.crop[0], s.crop[1]};
                break;
            case LayerKind::activation_only: break;
        }
        const std::uint64_t elements = cur[0] * cur[1] * cur[2];
        if (s.producing()) {
            if (s.has_bias) row.flops += elements;
            if (s.has_batchnorm) row.flops += 2 * elements;
        }
        if (s.kind != LayerKind::center_crop && s.activation.kind != ActivationKind::identity) row.flops += elements;
        r.rows.push_back(row);
    }
    sum_rows(r);
    return r;
}

CostReport reduction_report(const CostReport& base, const CostReport& pruned) {
    if (base.rows.size() != pruned.rows.size()) {
        throw std::invalid_argument("reduction_report: reports have " + std::to_string(base.rows.size()) + " and " +
                                    std::to_string(pruned.rows.size()) + " layers");
    }
    CostReport r = pruned;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        if (base.rows[i].layer != pruned.rows[i].layer || base.rows[i].kind != pruned.rows[i].kind) {
            throw std::invalid_argument("reduction_report: layer " + std::to_string(i + 1) + " differs in kind");
        }
        r.rows[i].params_reduction_pct = reduction_pct(base.rows[i].params, pruned.rows[i].params);
        if (base.has_flops && pruned.has_flops) {
            r.rows[i].flops_reduction_pct = reduction_pct(base.rows[i].flops, pruned.rows[i].flops);
        }
    }
    r.params_reduction_pct = reduction_pct(base.total_params, pruned.total_params);
    if (base.has_flops && pruned.has_flops) r.flops_reduction_pct = reduction_pct(base.total_flops, pruned.total_flops);
    return r;
}

json CostReport::to_json() const {
    json layers = json::array();
    for (const auto& row : rows) {
        json e{{"layer", row.layer}, {"kind", to_string(row.kind)}, {"params", row.params}, {"buffers", row.buffers}};
        if (has_flops) e["flops"] = row.flops;
        if (row.params_reduction_pct) e["params_reduction_pct"] = *row.params_reduction_pct;
        if (row.flops_reduction_pct) e["flops_reduction_pct"] = *row.flops_reduction_pct;
        layers.push_back(std::move(e));
    }
    json totals{{"params", total_params}, {"buffers", total_buffers}};
    if (has_flops) totals["flops"] = total_flops;
    json out{{"flops_convention", kFlopsConvention}, {"layers", layers}, {"totals", totals}};
    if (params_reduction_pct || flops_reduction_pct) {
        json red = json::object();
        if (params_reduction_pct) red["params_pct"] = *params_reduction_pct;
        if (flops_reduction_pct) red["flops_pct"] = *flops_reduction_pct;
        out["reduction"] = red;
    }
    return out;
}

std::string CostReport::to_table() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%5s  %-15s %14s %10s %16s %9s %9s\n", "layer", "kind", "params", "buffers", "flops",
                  "d_params%", "d_flops%");
    os << line;
    auto pct = [](const std::optional<double>& v) {
        char b[16];
        if (v) std::snprintf(b, sizeof b, "%.2f", *v);
        else std::snprintf(b, sizeof b, "-");
        return std::string(b);
    };
    for (const auto& row : rows) {
        std::snprintf(line, sizeof line, "%5zu  %-15s %14llu %10llu %16llu %9s %9s\n", row.layer,
                      to_string(row.kind).c_str(), static_cast<unsigned long long>(row.params),
                      static_cast<unsigned long long>(row.buffers), static_cast<unsigned long long>(row.flops),
                      pct(row.params_reduction_pct).c_str(), pct(row.flops_reduction_pct).c_str());
        os << line;
    }
    std::snprintf(line, sizeof line, "%5s  %-15s %14llu %10llu %16llu %9s %9s\n", "total", "",
                  static_cast<unsigned long long>(total_params), static_cast<unsigned long long>(total_buffers),
                  static_cast<unsigned long long>(total_flops), pct(params_reduction_pct).c_str(),
                  pct(flops_reduction_pct).c_str());
    os << line;
    os << "# FLOPs: " << kFlopsConvention << "\n";
    return os.str();
}

std::string CostReport::to_csv() const {
    std::ostringstream os;
    os << "layer,kind,params,buffers,flops,params_reduction_pct,flops_reduction_pct\n";
    for (const auto& row : rows) {
        os << row.layer << ',' << to_string(row.kind) << ',' << row.params << ',' << row.buffers << ',' << row.flops
           << ',';
        if (row.params_reduction_pct) os << *row.params_reduction_pct;
        os << ',';
        if (row.flops_reduction_pct) os << *row.flops_reduction_pct;
        os << '\n';
    }
    return os.str();
}

}  // namespace einv
