#include "repeatnet/arch.hpp"

#include <algorithm>
#include <sstream>

namespace repeatnet {

namespace {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::conv_block: return "block";
        case LayerKind::pool: return "pool";
        case LayerKind::dense: return "dense";
    }
    return "?";
}

LayerKind kind_from_string(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "block") return LayerKind::conv_block;
    if (s == "pool") return LayerKind::pool;
    if (s == "dense") return LayerKind::dense;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

const char* mode_name(ScaleMode m) {
    switch (m) {
        case ScaleMode::none: return "none";
        case ScaleMode::width: return "width";
        case ScaleMode::depth: return "depth";
    }
    return "?";
}

ScaleMode mode_from_string(const std::string& s) {
    if (s == "none") return ScaleMode::none;
    if (s == "width") return ScaleMode::width;
    if (s == "depth") return ScaleMode::depth;
    throw std::invalid_argument("unknown scale mode '" + s + "'");
}

bool shape_preserving(const LayerSpec& l) {
    return l.kind == LayerKind::conv && l.in_ch == l.out_ch && l.stride == 1 &&
           2 * l.padding == l.kernel - 1;
}

}  // namespace

int ArchSpec::num_stages() const {
    int mx = -1;
    for (const auto& l : layers)
        if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_block)
            mx = std::max(mx, l.stage_id);
    return mx + 1;
}

void ArchSpec::validate() const {
    if (layers.empty()) throw std::invalid_argument("arch: no layers");
    int channels = in_ch;
    int dense_count = 0;
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::conv_block:
                if (l.in_ch != channels)
                    throw std::invalid_argument(
                        "arch: layer " + std::to_string(i) + " expects " + std::to_string(l.in_ch) +
                        " input channels but receives " + std::to_string(channels));
                if (l.out_ch <= 0 || l.kernel <= 0)
                    throw std::invalid_argument("arch: bad channel/kernel at layer " +
                                                std::to_string(i));
                channels = l.out_ch;
                break;
            case LayerKind::pool:
                break;
            case LayerKind::dense:
                ++dense_count;
                if (i + 1 != layers.size())
                    throw std::invalid_argument("arch: classifier head must be the last layer");
                break;
        }
    }
    if (dense_count != 1) throw std::invalid_argument("arch: exactly one classifier head required");
}

namespace {

ConvPlan make_conv_plan(int in_ch, int out_ch, int kernel, int stride, int padding) {
    ConvPlan c;
    c.parent_in = c.realized_in = in_ch;
    c.parent_out = c.realized_out = out_ch;
    c.kernel = kernel;
    c.stride = stride;
    c.padding = padding;
    return c;
}

// Applies width repetition to one conv: the parent keeps its base shape, the
// realized conv widens by gamma1/gamma2.
void widen_conv(ConvPlan& c, int g1, int g2, RepeatVariant variant, bool dense_equivalent) {
    c.gamma1 = g1;
    c.gamma2 = g2;
    c.realized_in = c.parent_in * g1;
    c.realized_out = c.parent_out * g2;
    c.variant = variant;
    if (dense_equivalent) {
        // fully trainable at the realized shape
        c.repeated = false;
        c.gamma1 = c.gamma2 = 1;
        c.parent_in = c.realized_in;
        c.parent_out = c.realized_out;
    } else {
        c.repeated = g1 * g2 > 1;
        if (!c.repeated) c.variant = RepeatVariant::linear;
    }
}

PlanAccounting compute_accounting(const RealizedPlan& plan);

RealizedPlan assemble(const ArchSpec& arch, const ScalePolicy& policy,
                      std::vector<LayerPlan> layers) {
    RealizedPlan plan;
    plan.arch = arch;
    plan.scale = policy;
    plan.layers = std::move(layers);
    plan.accounting = compute_accounting(plan);
    return plan;
}

PlanAccounting compute_accounting(const RealizedPlan& plan) {
    PlanAccounting acc;
    int64_t beta_scalars = 0, latent_scalars = 0, bn_running = 0;
    int h = plan.arch.in_h, w = plan.arch.in_w;
    int channels = plan.arch.in_ch;

    auto conv_cost = [&](const ConvPlan& c, int in_h, int in_w, int& out_h, int& out_w) {
        out_h = kernels::conv_out_extent(in_h, c.kernel, c.stride, c.padding);
        out_w = kernels::conv_out_extent(in_w, c.kernel, c.stride, c.padding);
        if (out_h <= 0 || out_w <= 0)
            throw std::invalid_argument("plan: non-positive spatial size in conv");
        const int64_t macs = 2LL * c.kernel * c.kernel * c.realized_in * c.realized_out * out_h *
                             out_w * c.copies;
        acc.flops_conv += macs;
        // batch norm + activation, one op per output element, per realized copy
        acc.other_flops += 2LL * c.realized_out * out_h * out_w * c.copies;
        if (c.repeated) {
            acc.conv_scalars += c.parent_scalars();
            if (c.variant == RepeatVariant::s) beta_scalars += 2LL * c.num_children();
            if (c.variant == RepeatVariant::f)
                latent_scalars += static_cast<int64_t>(c.num_children()) * c.parent_scalars();
        } else {
            acc.conv_scalars += c.plain_scalars() * c.copies;
        }
        acc.bn_scalars += 2LL * c.realized_out * c.copies;
        bn_running += 2LL * c.realized_out * c.copies;
    };

    for (const auto& layer : plan.layers) {
        switch (layer.kind) {
            case LayerKind::conv: {
                int oh, ow;
                conv_cost(layer.convs[0], h, w, oh, ow);
                h = oh;
                w = ow;
                channels = layer.convs[0].realized_out;
                break;
            }
            case LayerKind::conv_block: {
                int oh, ow, oh2, ow2;
                conv_cost(layer.convs[0], h, w, oh, ow);
                conv_cost(layer.convs[1], oh, ow, oh2, ow2);
                if (layer.projection) {
                    int ph, pw;
                    conv_cost(*layer.projection, h, w, ph, pw);
                    if (ph != oh2 || pw != ow2)
                        throw std::invalid_argument("plan: projection spatial mismatch");
                }
                // residual add + trailing activation
                acc.other_flops += 2LL * layer.convs[1].realized_out * oh2 * ow2;
                h = oh2;
                w = ow2;
                channels = layer.convs[1].realized_out;
                break;
            }
            case LayerKind::pool: {
                const int oh = (h - layer.pool_kernel) / layer.pool_stride + 1;
                const int ow = (w - layer.pool_kernel) / layer.pool_stride + 1;
                if (oh <= 0 || ow <= 0)
                    throw std::invalid_argument("plan: non-positive spatial size in pool");
                acc.other_flops += static_cast<int64_t>(channels) * oh * ow;
                h = oh;
                w = ow;
                break;
            }
            case LayerKind::dense: {
                acc.other_flops += channels;  // global average pool output
                acc.dense_scalars +=
                    static_cast<int64_t>(layer.dense_in) * layer.dense_out + layer.dense_out;
                acc.flops_dense += 2LL * layer.dense_in * layer.dense_out;
                break;
            }
        }
    }

    acc.transform_scalars = beta_scalars + latent_scalars;
    acc.mask_bits = latent_scalars;
    acc.trainable_scalars =
        acc.conv_scalars + acc.transform_scalars + acc.bn_scalars + acc.dense_scalars;
    // floats on disk: conv weights, s-variant betas, BN affine + running stats,
    // classifier; f-variant masks cost one bit per latent entry
    acc.stored_bits =
        32 * (acc.conv_scalars + beta_scalars + acc.bn_scalars + bn_running + acc.dense_scalars) +
        latent_scalars;
    acc.inference_flops = acc.flops_conv + acc.flops_dense;
    return acc;
}

std::vector<LayerPlan> base_layers(const ArchSpec& arch) {
    std::vector<LayerPlan> out;
    int channels = arch.in_ch;
    for (const auto& l : arch.layers) {
        LayerPlan lp;
        lp.kind = l.kind;
        lp.stage_id = l.stage_id;
        switch (l.kind) {
            case LayerKind::conv:
                lp.convs.push_back(make_conv_plan(l.in_ch, l.out_ch, l.kernel, l.stride, l.padding));
                channels = l.out_ch;
                break;
            case LayerKind::conv_block:
                lp.convs.push_back(make_conv_plan(l.in_ch, l.out_ch, l.kernel, l.stride, l.padding));
                lp.convs.push_back(make_conv_plan(l.out_ch, l.out_ch, l.kernel, 1, l.padding));
                if (l.in_ch != l.out_ch || l.stride != 1)
                    lp.projection = make_conv_plan(l.in_ch, l.out_ch, 1, l.stride, 0);
                channels = l.out_ch;
                break;
            case LayerKind::pool:
                lp.pool_kernel = l.kernel;
                lp.pool_stride = l.stride;
                break;
            case LayerKind::dense:
                lp.dense_in = channels;
                lp.dense_out = arch.num_classes;
                break;
        }
        out.push_back(std::move(lp));
    }
    return out;
}

}  // namespace

RealizedPlan plan_width_scale(const ArchSpec& arch, int factor, RepeatVariant variant,
                              bool dense_equivalent) {
    arch.validate();
    if (factor < 1) throw std::invalid_argument("width scale factor must be >= 1");
    ScalePolicy policy;
    policy.mode = ScaleMode::width;
    policy.factor = factor;
    policy.variant = variant;
    policy.dense_equivalent = dense_equivalent;

    auto layers = base_layers(arch);
    if (factor > 1) {
        bool first_conv = true;
        for (auto& lp : layers) {
            if (lp.kind == LayerKind::conv || lp.kind == LayerKind::conv_block) {
                const bool layer_reads_input = first_conv;
                for (auto& c : lp.convs) {
                    // raw image channels are never tiled
                    const int g1 = first_conv ? 1 : factor;
                    widen_conv(c, g1, factor, variant, dense_equivalent);
                    first_conv = false;
                }
                if (lp.projection)
                    widen_conv(*lp.projection, layer_reads_input ? 1 : factor, factor, variant,
                               dense_equivalent);
            } else if (lp.kind == LayerKind::dense) {
                lp.dense_in *= factor;  // classifier over the widened features
            }
        }
    }
    return assemble(arch, policy, std::move(layers));
}

RealizedPlan plan_depth_scale(const ArchSpec& arch, const std::vector<int>& depth_repeats,
                              RepeatVariant variant, bool dense_equivalent) {
    arch.validate();
    const int stages = arch.num_stages();
    std::vector<int> repeats = depth_repeats;
    if (repeats.empty()) repeats.assign(static_cast<size_t>(stages), 1);
    if (static_cast<int>(repeats.size()) != stages)
        throw std::invalid_argument("depth_repeats must have one entry per stage (" +
                                    std::to_string(stages) + " stages)");
    for (int r : repeats)
        if (r < 1) throw std::invalid_argument("depth repeat counts must be >= 1");

    ScalePolicy policy;
    policy.mode = ScaleMode::depth;
    policy.depth_repeats = repeats;
    policy.variant = variant;
    policy.dense_equivalent = dense_equivalent;

    // per stage, the last shape-preserving plain conv is the designated parent
    std::vector<int> designated(static_cast<size_t>(stages), -1);
    for (size_t i = 0; i < arch.layers.size(); ++i)
        if (shape_preserving(arch.layers[i]))
            designated[static_cast<size_t>(arch.layers[i].stage_id)] = static_cast<int>(i);

    for (int s = 0; s < stages; ++s)
        if (repeats[static_cast<size_t>(s)] > 1 && designated[static_cast<size_t>(s)] < 0)
            throw std::invalid_argument(
                "depth repeat requested on stage " + std::to_string(s) +
                " which has no shape-preserving conv (need in_ch == out_ch, stride 1)");

    auto layers = base_layers(arch);
    for (size_t i = 0; i < arch.layers.size(); ++i) {
        const auto& l = arch.layers[i];
        if (l.kind != LayerKind::conv) continue;
        const int r = repeats[static_cast<size_t>(l.stage_id)];
        if (r > 1 && designated[static_cast<size_t>(l.stage_id)] == static_cast<int>(i)) {
            auto& c = layers[i].convs[0];
            c.copies = r;
            c.variant = variant;
            c.repeated = !dense_equivalent;
        }
    }
    return assemble(arch, policy, std::move(layers));
}

RealizedPlan plan_scale(const ArchSpec& arch, const ScalePolicy& policy) {
    switch (policy.mode) {
        case ScaleMode::none: {
            arch.validate();
            ScalePolicy p = policy;
            p.factor = 1;
            return assemble(arch, p, base_layers(arch));
        }
        case ScaleMode::width:
            return plan_width_scale(arch, policy.factor, policy.variant, policy.dense_equivalent);
        case ScaleMode::depth:
            return plan_depth_scale(arch, policy.depth_repeats, policy.variant,
                                    policy.dense_equivalent);
    }
    throw std::invalid_argument("bad scale mode");
}

int64_t count_trainable_params(const RealizedPlan& plan) { return plan.accounting.trainable_scalars; }
int64_t count_model_size_bits(const RealizedPlan& plan) { return plan.accounting.stored_bits; }
int64_t count_flops(const RealizedPlan& plan) { return plan.accounting.inference_flops; }

FlopsSearchResult flops_matched_search(const ArchSpec& arch, int64_t target_flops, ScaleMode mode,
                                       RepeatVariant variant, int cap) {
    arch.validate();
    if (mode != ScaleMode::width && mode != ScaleMode::depth)
        throw std::invalid_argument("flops_matched_search: mode must be width or depth");

    auto plan_for = [&](int factor) {
        if (mode == ScaleMode::width) return plan_width_scale(arch, factor, variant);
        std::vector<int> repeats;
        for (size_t i = 0; i < arch.layers.size(); ++i)
            if (shape_preserving(arch.layers[i])) {
                const int s = arch.layers[i].stage_id;
                if (static_cast<int>(repeats.size()) <= s) repeats.resize(static_cast<size_t>(s) + 1, 1);
                repeats[static_cast<size_t>(s)] = factor;
            }
        if (repeats.empty())
            throw std::invalid_argument("flops_matched_search: no depth-repeatable stage");
        repeats.resize(static_cast<size_t>(arch.num_stages()), 1);
        return plan_depth_scale(arch, repeats, variant);
    };

    const int64_t base = count_flops(plan_for(1));
    if (target_flops < base)
        throw std::invalid_argument("flops_matched_search: target below base FLOPs");
    if (target_flops > count_flops(plan_for(cap)))
        throw std::invalid_argument("flops_matched_search: target unreachable within factor cap " +
                                    std::to_string(cap));

    int best_factor = 1;
    int64_t best_flops = base;
    int64_t best_err = std::abs(base - target_flops);
    for (int t = 2; t <= cap; ++t) {
        const int64_t f = count_flops(plan_for(t));
        const int64_t err = std::abs(f - target_flops);
        if (err < best_err) {  // ties keep the smaller factor
            best_err = err;
            best_factor = t;
            best_flops = f;
        }
    }

    FlopsSearchResult res;
    res.policy = plan_for(best_factor).scale;
    res.achieved = best_flops;
    res.target = target_flops;
    res.ratio = static_cast<double>(best_flops) / static_cast<double>(target_flops);
    return res;
}

ArchSpec make_preset(const std::string& name) {
    ArchSpec a;
    auto conv = [](int in, int out, int stage, int stride = 1) {
        LayerSpec l;
        l.kind = LayerKind::conv;
        l.in_ch = in;
        l.out_ch = out;
        l.kernel = 3;
        l.stride = stride;
        l.padding = 1;
        l.stage_id = stage;
        return l;
    };
    auto block = [](int in, int out, int stage, int stride) {
        LayerSpec l;
        l.kind = LayerKind::conv_block;
        l.in_ch = in;
        l.out_ch = out;
        l.kernel = 3;
        l.stride = stride;
        l.padding = 1;
        l.stage_id = stage;
        return l;
    };
    auto pool = []() {
        LayerSpec l;
        l.kind = LayerKind::pool;
        l.kernel = 2;
        l.stride = 2;
        l.padding = 0;
        return l;
    };
    auto dense = []() {
        LayerSpec l;
        l.kind = LayerKind::dense;
        l.kernel = 0;
        l.stride = 0;
        l.padding = 0;
        return l;
    };

    if (name == "mnist2conv") {
        a.in_ch = 1;
        a.in_h = a.in_w = 28;
        a.num_classes = 10;
        a.layers = {conv(1, 12, 0), pool(), conv(12, 12, 1), pool(), dense()};
    } else if (name == "cifar4conv") {
        a.in_ch = 3;
        a.in_h = a.in_w = 32;
        a.num_classes = 10;
        a.layers = {conv(3, 8, 0),   pool(), conv(8, 16, 1), pool(),
                    conv(16, 16, 2), conv(16, 16, 3), dense()};
    } else if (name == "resnet8") {
        a.in_ch = 3;
        a.in_h = a.in_w = 32;
        a.num_classes = 10;
        a.layers = {conv(3, 8, 0), block(8, 8, 1, 1), block(8, 16, 2, 2), block(16, 32, 3, 2),
                    dense()};
    } else if (name == "toy4conv") {
        a.in_ch = 3;
        a.in_h = a.in_w = 8;
        a.num_classes = 10;
        a.layers = {conv(3, 4, 0), conv(4, 8, 1), conv(8, 8, 2), conv(8, 8, 3), dense()};
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    a.validate();
    return a;
}

std::string accounting_table(const RealizedPlan& plan) {
    std::ostringstream os;
    const auto& acc = plan.accounting;
    os << "layer           realized                 children  trainable     flops\n";
    int conv_idx = 0, block_idx = 0;
    int h = plan.arch.in_h, w = plan.arch.in_w;
    auto row = [&](const std::string& name, const ConvPlan& c, int in_h, int in_w) {
        const int oh = kernels::conv_out_extent(in_h, c.kernel, c.stride, c.padding);
        const int ow = kernels::conv_out_extent(in_w, c.kernel, c.stride, c.padding);
        std::ostringstream shape;
        shape << c.realized_out << "x" << c.realized_in << "x" << c.kernel << "x" << c.kernel;
        if (c.copies > 1) shape << " x" << c.copies;
        int64_t trainable = c.repeated ? c.parent_scalars() : c.plain_scalars() * c.copies;
        if (c.repeated && c.variant == RepeatVariant::s) trainable += 2LL * c.num_children();
        if (c.repeated && c.variant == RepeatVariant::f)
            trainable += static_cast<int64_t>(c.num_children()) * c.parent_scalars();
        const int64_t flops =
            2LL * c.kernel * c.kernel * c.realized_in * c.realized_out * oh * ow * c.copies;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-15s %-24s %-9d %-13lld %lld\n", name.c_str(),
                      shape.str().c_str(), c.repeated ? c.num_children() : 0,
                      static_cast<long long>(trainable), static_cast<long long>(flops));
        os << buf;
    };
    for (const auto& lp : plan.layers) {
        switch (lp.kind) {
            case LayerKind::conv: {
                row("conv" + std::to_string(++conv_idx), lp.convs[0], h, w);
                h = kernels::conv_out_extent(h, lp.convs[0].kernel, lp.convs[0].stride,
                                             lp.convs[0].padding);
                w = kernels::conv_out_extent(w, lp.convs[0].kernel, lp.convs[0].stride,
                                             lp.convs[0].padding);
                break;
            }
            case LayerKind::conv_block: {
                const std::string base = "block" + std::to_string(++block_idx);
                row(base + ".conv1", lp.convs[0], h, w);
                const int oh = kernels::conv_out_extent(h, lp.convs[0].kernel, lp.convs[0].stride,
                                                        lp.convs[0].padding);
                const int ow = kernels::conv_out_extent(w, lp.convs[0].kernel, lp.convs[0].stride,
                                                        lp.convs[0].padding);
                row(base + ".conv2", lp.convs[1], oh, ow);
                if (lp.projection) row(base + ".proj", *lp.projection, h, w);
                h = oh;
                w = ow;
                break;
            }
            case LayerKind::pool:
                h = (h - lp.pool_kernel) / lp.pool_stride + 1;
                w = (w - lp.pool_kernel) / lp.pool_stride + 1;
                break;
            case LayerKind::dense: {
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%-15s %-24s %-9d %-13lld %lld\n", "fc",
                              (std::to_string(lp.dense_out) + "x" + std::to_string(lp.dense_in)).c_str(),
                              0,
                              static_cast<long long>(static_cast<int64_t>(lp.dense_in) * lp.dense_out +
                                                     lp.dense_out),
                              static_cast<long long>(2LL * lp.dense_in * lp.dense_out));
                os << buf;
                break;
            }
        }
    }
    os << "\n";
    os << "trainable scalars: " << acc.trainable_scalars << "  (conv " << acc.conv_scalars
       << ", transform " << acc.transform_scalars << ", bn " << acc.bn_scalars << ", dense "
       << acc.dense_scalars << ")\n";
    os << "stored size bits:  " << acc.stored_bits << "  (mask bits " << acc.mask_bits << ")\n";
    os << "inference flops:   " << acc.inference_flops << "  (conv " << acc.flops_conv << ", dense "
       << acc.flops_dense << "; 1 MAC = 2 FLOPs)\n";
    os << "other elementwise: " << acc.other_flops << "  (pool/bn/activation, 1 per element)\n";
    return os.str();
}

// -------------------------------- JSON ------------------------------------

void to_json(nlohmann::json& j, const LayerSpec& l) {
    j = {{"kind", kind_name(l.kind)}, {"stage", l.stage_id}};
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_block) {
        j["in"] = l.in_ch;
        j["out"] = l.out_ch;
        j["k"] = l.kernel;
        j["stride"] = l.stride;
        j["pad"] = l.padding;
    } else if (l.kind == LayerKind::pool) {
        j["k"] = l.kernel;
        j["stride"] = l.stride;
    }
}

void from_json(const nlohmann::json& j, LayerSpec& l) {
    l = LayerSpec{};
    l.kind = kind_from_string(j.at("kind").get<std::string>());
    l.stage_id = j.value("stage", 0);
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_block) {
        l.in_ch = j.at("in").get<int>();
        l.out_ch = j.at("out").get<int>();
        l.kernel = j.value("k", 3);
        l.stride = j.value("stride", 1);
        l.padding = j.value("pad", (l.kernel - 1) / 2);
    } else if (l.kind == LayerKind::pool) {
        l.kernel = j.value("k", 2);
        l.stride = j.value("stride", 2);
        l.padding = 0;
    } else {
        l.kernel = 0;
        l.padding = 0;
        l.stride = 0;
    }
}

void to_json(nlohmann::json& j, const ArchSpec& a) {
    j = {{"input", {{"c", a.in_ch}, {"h", a.in_h}, {"w", a.in_w}}},
         {"num_classes", a.num_classes},
         {"layers", a.layers}};
}

void from_json(const nlohmann::json& j, ArchSpec& a) {
    a = ArchSpec{};
    if (j.contains("preset")) {
        a = make_preset(j.at("preset").get<std::string>());
        return;
    }
    a.in_ch = j.at("input").at("c").get<int>();
    a.in_h = j.at("input").at("h").get<int>();
    a.in_w = j.at("input").at("w").get<int>();
    a.num_classes = j.at("num_classes").get<int>();
    a.layers = j.at("layers").get<std::vector<LayerSpec>>();
}

void to_json(nlohmann::json& j, const ScalePolicy& p) {
    j = {{"mode", mode_name(p.mode)},
         {"factor", p.factor},
         {"depth_repeats", p.depth_repeats},
         {"variant", to_string(p.variant)},
         {"dense_equivalent", p.dense_equivalent},
         {"identity_start", p.identity_start}};
}

void from_json(const nlohmann::json& j, ScalePolicy& p) {
    p = ScalePolicy{};
    p.mode = mode_from_string(j.value("mode", "none"));
    p.factor = j.value("factor", 1);
    p.depth_repeats = j.value("depth_repeats", std::vector<int>{});
    p.variant = variant_from_string(j.value("variant", "linear"));
    p.dense_equivalent = j.value("dense_equivalent", false);
    p.identity_start = j.value("identity_start", false);
}

void to_json(nlohmann::json& j, const ConvPlan& c) {
    j = {{"parent_out", c.parent_out}, {"parent_in", c.parent_in},
         {"k", c.kernel},              {"stride", c.stride},
         {"pad", c.padding},           {"realized_out", c.realized_out},
         {"realized_in", c.realized_in}, {"gamma1", c.gamma1},
         {"gamma2", c.gamma2},         {"copies", c.copies},
         {"variant", to_string(c.variant)}, {"repeated", c.repeated}};
}

void from_json(const nlohmann::json& j, ConvPlan& c) {
    c = ConvPlan{};
    c.parent_out = j.at("parent_out").get<int>();
    c.parent_in = j.at("parent_in").get<int>();
    c.kernel = j.at("k").get<int>();
    c.stride = j.at("stride").get<int>();
    c.padding = j.at("pad").get<int>();
    c.realized_out = j.at("realized_out").get<int>();
    c.realized_in = j.at("realized_in").get<int>();
    c.gamma1 = j.at("gamma1").get<int>();
    c.gamma2 = j.at("gamma2").get<int>();
    c.copies = j.at("copies").get<int>();
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.repeated = j.at("repeated").get<bool>();
}

void to_json(nlohmann::json& j, const LayerPlan& l) {
    j = {{"kind", kind_name(l.kind)}, {"stage", l.stage_id}};
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_block) {
        j["convs"] = l.convs;
        if (l.projection) j["projection"] = *l.projection;
    } else if (l.kind == LayerKind::pool) {
        j["k"] = l.pool_kernel;
        j["stride"] = l.pool_stride;
    } else {
        j["dense_in"] = l.dense_in;
        j["dense_out"] = l.dense_out;
    }
}

void from_json(const nlohmann::json& j, LayerPlan& l) {
    l = LayerPlan{};
    l.kind = kind_from_string(j.at("kind").get<std::string>());
    l.stage_id = j.value("stage", 0);
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_block) {
        l.convs = j.at("convs").get<std::vector<ConvPlan>>();
        if (j.contains("projection")) l.projection = j.at("projection").get<ConvPlan>();
    } else if (l.kind == LayerKind::pool) {
        l.pool_kernel = j.value("k", 2);
        l.pool_stride = j.value("stride", 2);
    } else {
        l.dense_in = j.at("dense_in").get<int>();
        l.dense_out = j.at("dense_out").get<int>();
    }
}

void to_json(nlohmann::json& j, const PlanAccounting& a) {
    j = {{"trainable_scalars", a.trainable_scalars},
         {"stored_bits", a.stored_bits},
         {"inference_flops", a.inference_flops},
         {"other_flops", a.other_flops},
         {"conv_scalars", a.conv_scalars},
         {"transform_scalars", a.transform_scalars},
         {"bn_scalars", a.bn_scalars},
         {"dense_scalars", a.dense_scalars},
         {"mask_bits", a.mask_bits},
         {"flops_conv", a.flops_conv},
         {"flops_dense", a.flops_dense},
         {"flops_convention", "1 MAC = 2 FLOPs"}};
}

void from_json(const nlohmann::json& j, PlanAccounting& a) {
    a = PlanAccounting{};
    a.trainable_scalars = j.at("trainable_scalars").get<int64_t>();
    a.stored_bits = j.at("stored_bits").get<int64_t>();
    a.inference_flops = j.at("inference_flops").get<int64_t>();
    a.other_flops = j.at("other_flops").get<int64_t>();
    a.conv_scalars = j.at("conv_scalars").get<int64_t>();
    a.transform_scalars = j.at("transform_scalars").get<int64_t>();
    a.bn_scalars = j.at("bn_scalars").get<int64_t>();
    a.dense_scalars = j.at("dense_scalars").get<int64_t>();
    a.mask_bits = j.at("mask_bits").get<int64_t>();
    a.flops_conv = j.at("flops_conv").get<int64_t>();
    a.flops_dense = j.at("flops_dense").get<int64_t>();
}

void to_json(nlohmann::json& j, const RealizedPlan& p) {
    j = {{"arch", p.arch}, {"scale", p.scale}, {"layers", p.layers}, {"accounting", p.accounting}};
}

void from_json(const nlohmann::json& j, RealizedPlan& p) {
    p = RealizedPlan{};
    p.arch = j.at("arch").get<ArchSpec>();
    p.scale = j.at("scale").get<ScalePolicy>();
    p.layers = j.at("layers").get<std::vector<LayerPlan>>();
    p.accounting = j.at("accounting").get<PlanAccounting>();
    const RealizedPlan recomputed = plan_scale(p.arch, p.scale);
    if (!(recomputed.layers == p.layers) || !(recomputed.accounting == p.accounting))
        throw DataError("plan file does not match a replan from its arch and scale policy");
}

}  // namespace repeatnet
