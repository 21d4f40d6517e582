#pragma once

#include <optional>
#include <string>
#include <vector>

#include "repeatnet/arch.hpp"
#include "repeatnet/optim.hpp"
#include "repeatnet/ops.hpp"
#include "repeatnet/repeat.hpp"

namespace repeatnet {

template <typename T>
struct NamedParam {
    std::string name;
    TensorPtr<T> tensor;
    bool sign_bits = false;  // persist as a bit-packed mask instead of floats
    bool trainable = true;
};

// Executable network instantiated from a realized plan. Owns every parameter
// tensor, the repeat groups, and the batch-norm state.
template <typename T>
class Network {
public:
    static Network build(const RealizedPlan& plan, uint64_t seed) {
        Network net;
        net.plan_ = plan;
        Rng rng(seed);
        int conv_idx = 0, block_idx = 0;
        for (const auto& lp : plan.layers) {
            Layer layer;
            layer.kind = lp.kind;
            switch (lp.kind) {
                case LayerKind::conv:
                    layer.convs.push_back(
                        net.make_conv_unit(lp.convs[0], "conv" + std::to_string(++conv_idx), rng,
                                           plan.scale.identity_start));
                    break;
                case LayerKind::conv_block: {
                    const std::string base = "block" + std::to_string(++block_idx);
                    layer.convs.push_back(net.make_conv_unit(lp.convs[0], base + ".conv1", rng,
                                                             plan.scale.identity_start));
                    layer.convs.push_back(net.make_conv_unit(lp.convs[1], base + ".conv2", rng,
                                                             plan.scale.identity_start));
                    if (lp.projection)
                        layer.projection = net.make_conv_unit(*lp.projection, base + ".proj", rng,
                                                              plan.scale.identity_start);
                    break;
                }
                case LayerKind::pool:
                    layer.pool_kernel = lp.pool_kernel;
                    layer.pool_stride = lp.pool_stride;
                    break;
                case LayerKind::dense: {
                    layer.fc_weight = make_tensor<T>({lp.dense_out, lp.dense_in}, true);
                    layer.fc_weight->name = "fc.weight";
                    fill_normal(*layer.fc_weight, rng, 0.0, std::sqrt(2.0 / lp.dense_in));
                    layer.fc_bias = make_tensor<T>({lp.dense_out}, true);
                    layer.fc_bias->name = "fc.bias";
                    net.named_.push_back({"fc.weight", layer.fc_weight, false, true});
                    net.named_.push_back({"fc.bias", layer.fc_bias, false, true});
                    net.decay_.params.push_back(layer.fc_weight);
                    net.no_decay_.params.push_back(layer.fc_bias);
                    break;
                }
            }
            net.layers_.push_back(std::move(layer));
        }
        if (net.trainable_scalar_count() != plan.accounting.trainable_scalars)
            throw std::logic_error(
                "network/plan accounting mismatch: built " +
                std::to_string(net.trainable_scalar_count()) + " trainable scalars, plan says " +
                std::to_string(plan.accounting.trainable_scalars));
        return net;
    }

    TensorPtr<T> forward(Tape<T>& tape, TensorPtr<T> x, bool training) {
        for (auto& layer : layers_) {
            switch (layer.kind) {
                case LayerKind::conv:
                    x = run_conv_unit(tape, layer.convs[0], x, training, /*activation=*/true);
                    break;
                case LayerKind::conv_block: {
                    auto main = run_conv_unit(tape, layer.convs[0], x, training, true);
                    main = run_conv_unit(tape, layer.convs[1], main, training, false);
                    auto shortcut =
                        layer.projection ? run_conv_unit(tape, *layer.projection, x, training, false)
                                         : x;
                    x = relu(tape, add(tape, main, shortcut));
                    break;
                }
                case LayerKind::pool:
                    x = max_pool2d(tape, x, layer.pool_kernel, layer.pool_stride);
                    break;
                case LayerKind::dense:
                    x = global_avg_pool(tape, x);
                    x = dense(tape, x, layer.fc_weight, layer.fc_bias);
                    break;
            }
        }
        return x;
    }

    std::vector<ParamGroup<T>> param_groups() {
        std::vector<ParamGroup<T>> groups;
        groups.push_back(decay_);
        groups.back().apply_weight_decay = true;
        groups.push_back(no_decay_);
        if (!clamped_.params.empty()) {
            groups.push_back(clamped_);
            groups.back().clamp_unit = true;
        }
        return groups;
    }

    const std::vector<NamedParam<T>>& named_params() const { return named_; }
    const RealizedPlan& plan() const { return plan_; }

    int64_t trainable_scalar_count() const {
        int64_t n = 0;
        for (const auto& p : named_)
            if (p.trainable) n += p.tensor->numel();
        return n;
    }

    // checkpoint loading restores running statistics, so eval mode is valid
    void mark_bn_ready() {
        for (auto& layer : layers_) {
            for (auto& cu : layer.convs)
                for (auto& bn : cu.bns)
                    if (bn.batches_seen == 0) bn.batches_seen = 1;
            if (layer.projection)
                for (auto& bn : layer.projection->bns)
                    if (bn.batches_seen == 0) bn.batches_seen = 1;
        }
    }

private:
    struct ConvUnit {
        bool repeated = false;
        RepeatGroup<T> group;                 // repeated
        std::vector<TensorPtr<T>> plain;      // otherwise, one weight per copy
        std::vector<BatchNorm2d<T>> bns;      // one per realized copy
        int stride = 1;
        int padding = 1;
        int copies = 1;
    };
    struct Layer {
        LayerKind kind = LayerKind::conv;
        std::vector<ConvUnit> convs;
        std::optional<ConvUnit> projection;
        int pool_kernel = 2;
        int pool_stride = 2;
        TensorPtr<T> fc_weight;
        TensorPtr<T> fc_bias;
    };

    ConvUnit make_conv_unit(const ConvPlan& cp, const std::string& name, Rng& rng,
                            bool identity_start) {
        ConvUnit cu;
        cu.stride = cp.stride;
        cu.padding = cp.padding;
        cu.copies = cp.copies;
        cu.repeated = cp.repeated;
        const double fan_in = static_cast<double>(cp.realized_in) * cp.kernel * cp.kernel;
        if (cp.repeated) {
            auto& g = cu.group;
            g.parent = make_tensor<T>({cp.parent_out, cp.parent_in, cp.kernel, cp.kernel}, true);
            g.parent->name = name + ".parent";
            fill_normal(*g.parent, rng, 0.0, std::sqrt(2.0 / fan_in));
            g.gamma1 = cp.gamma1;
            g.gamma2 = cp.gamma2;
            g.copies = cp.copies;
            g.variant = cp.variant;
            init_transforms(g, rng, identity_start);
            named_.push_back({g.parent->name, g.parent, false, true});
            decay_.params.push_back(g.parent);
            for (int i = 0; i < g.num_children(); ++i) {
                const std::string child = name + ".child" + std::to_string(i);
                if (g.variant == RepeatVariant::s) {
                    g.beta1[static_cast<size_t>(i)]->name = child + ".beta1";
                    g.beta2[static_cast<size_t>(i)]->name = child + ".beta2";
                    named_.push_back({child + ".beta1", g.beta1[static_cast<size_t>(i)], false, true});
                    named_.push_back({child + ".beta2", g.beta2[static_cast<size_t>(i)], false, true});
                    no_decay_.params.push_back(g.beta1[static_cast<size_t>(i)]);
                    no_decay_.params.push_back(g.beta2[static_cast<size_t>(i)]);
                } else if (g.variant == RepeatVariant::f) {
                    g.latents[static_cast<size_t>(i)]->name = child + ".mask";
                    named_.push_back({child + ".mask", g.latents[static_cast<size_t>(i)], true, true});
                    clamped_.params.push_back(g.latents[static_cast<size_t>(i)]);
                }
            }
        } else {
            for (int i = 0; i < cp.copies; ++i) {
                auto w = make_tensor<T>({cp.realized_out, cp.realized_in, cp.kernel, cp.kernel}, true);
                w->name = cp.copies > 1 ? name + ".copy" + std::to_string(i) + ".weight"
                                        : name + ".weight";
                fill_normal(*w, rng, 0.0, std::sqrt(2.0 / fan_in));
                named_.push_back({w->name, w, false, true});
                decay_.params.push_back(w);
                cu.plain.push_back(std::move(w));
            }
        }
        for (int i = 0; i < cp.copies; ++i) {
            cu.bns.emplace_back(cp.realized_out);
            auto& bn = cu.bns.back();
            const std::string bn_name =
                cp.copies > 1 ? name + ".child" + std::to_string(i) + ".bn" : name + ".bn";
            bn.gamma->name = bn_name + ".gamma";
            bn.beta->name = bn_name + ".beta";
            bn.running_mean->name = bn_name + ".running_mean";
            bn.running_var->name = bn_name + ".running_var";
            named_.push_back({bn.gamma->name, bn.gamma, false, true});
            named_.push_back({bn.beta->name, bn.beta, false, true});
            named_.push_back({bn.running_mean->name, bn.running_mean, false, false});
            named_.push_back({bn.running_var->name, bn.running_var, false, false});
            no_decay_.params.push_back(bn.gamma);
            no_decay_.params.push_back(bn.beta);
        }
        return cu;
    }

    TensorPtr<T> run_conv_unit(Tape<T>& tape, ConvUnit& cu, TensorPtr<T> x, bool training,
                               bool activation) {
        if (cu.copies == 1) {
            TensorPtr<T> w =
                cu.repeated ? realize_weights(tape, cu.group) : cu.plain[0];
            x = conv2d<T>(tape, x, w, nullptr, cu.stride, cu.padding);
            x = cu.bns[0].forward(tape, x, training);
            if (activation) x = relu(tape, x);
            return x;
        }
        // depth-expanded: each child is its own conv + bn + activation
        for (int i = 0; i < cu.copies; ++i) {
            TensorPtr<T> w = cu.repeated ? realize_child(tape, cu.group, i)
                                         : cu.plain[static_cast<size_t>(i)];
            x = conv2d<T>(tape, x, w, nullptr, cu.stride, cu.padding);
            x = cu.bns[static_cast<size_t>(i)].forward(tape, x, training);
            const bool last = i + 1 == cu.copies;
            if (activation || !last) x = relu(tape, x);
        }
        return x;
    }

    RealizedPlan plan_;
    std::vector<Layer> layers_;
    std::vector<NamedParam<T>> named_;
    ParamGroup<T> decay_;
    ParamGroup<T> no_decay_;
    ParamGroup<T> clamped_;
};

}  // namespace repeatnet
