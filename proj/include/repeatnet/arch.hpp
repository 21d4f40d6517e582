#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "repeatnet/repeat.hpp"

namespace repeatnet {

enum class LayerKind { conv, conv_block, pool, dense };

// Declarative base-architecture layer. Residual blocks (conv_block) are two
// 3x3 convs with a 1x1 projection shortcut when channels or stride change.
struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    int stage_id = 0;

    bool operator==(const LayerSpec&) const = default;
};

struct ArchSpec {
    std::vector<LayerSpec> layers;
    int num_classes = 10;
    int in_ch = 3;
    int in_h = 32;
    int in_w = 32;

    bool operator==(const ArchSpec&) const = default;
    int num_stages() const;
    void validate() const;  // channel chaining, exactly one classifier head
};

enum class ScaleMode { none, width, depth };

struct ScalePolicy {
    ScaleMode mode = ScaleMode::none;
    int factor = 1;                  // width multiplier t
    std::vector<int> depth_repeats;  // per-stage repeat counts r_s
    RepeatVariant variant = RepeatVariant::linear;
    bool dense_equivalent = false;  // realize fully trainable at scaled shapes
    bool identity_start = false;    // transforms start at the identity configuration

    bool operator==(const ScalePolicy&) const = default;
};

// One realized convolution (plus its batch norm). `copies` > 1 means the
// conv expands into that many sequential layers sharing one parent.
struct ConvPlan {
    int parent_out = 0;
    int parent_in = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    int realized_out = 0;
    int realized_in = 0;
    int gamma1 = 1;
    int gamma2 = 1;
    int copies = 1;
    RepeatVariant variant = RepeatVariant::linear;
    bool repeated = false;  // false: plain trainable weight at realized shape

    bool operator==(const ConvPlan&) const = default;
    int64_t parent_scalars() const {
        return static_cast<int64_t>(parent_out) * parent_in * kernel * kernel;
    }
    int64_t plain_scalars() const {
        return static_cast<int64_t>(realized_out) * realized_in * kernel * kernel;
    }
    int num_children() const { return copies > 1 ? copies : gamma1 * gamma2; }
};

struct LayerPlan {
    LayerKind kind = LayerKind::conv;
    int stage_id = 0;
    std::vector<ConvPlan> convs;          // conv: 1; conv_block: 2
    std::optional<ConvPlan> projection;   // conv_block shortcut when shapes change
    int pool_kernel = 2;
    int pool_stride = 2;
    int dense_in = 0;
    int dense_out = 0;

    bool operator==(const LayerPlan&) const = default;
};

struct PlanAccounting {
    int64_t trainable_scalars = 0;
    int64_t stored_bits = 0;
    int64_t inference_flops = 0;  // conv + dense, 1 MAC = 2 FLOPs
    int64_t other_flops = 0;      // pool / BN / activation, 1 per output element
    int64_t conv_scalars = 0;     // parents and plain conv weights
    int64_t transform_scalars = 0;
    int64_t bn_scalars = 0;
    int64_t dense_scalars = 0;
    int64_t mask_bits = 0;
    int64_t flops_conv = 0;
    int64_t flops_dense = 0;

    bool operator==(const PlanAccounting&) const = default;
};

struct RealizedPlan {
    ArchSpec arch;
    ScalePolicy scale;
    std::vector<LayerPlan> layers;
    PlanAccounting accounting;

    bool operator==(const RealizedPlan&) const = default;
};

RealizedPlan plan_scale(const ArchSpec& arch, const ScalePolicy& policy);
RealizedPlan plan_width_scale(const ArchSpec& arch, int factor, RepeatVariant variant,
                              bool dense_equivalent = false);
RealizedPlan plan_depth_scale(const ArchSpec& arch, const std::vector<int>& depth_repeats,
                              RepeatVariant variant, bool dense_equivalent = false);

int64_t count_trainable_params(const RealizedPlan& plan);
int64_t count_model_size_bits(const RealizedPlan& plan);
// conv + dense FLOPs for one sample at the arch's input shape (1 MAC = 2 FLOPs)
int64_t count_flops(const RealizedPlan& plan);

struct FlopsSearchResult {
    ScalePolicy policy;
    int64_t achieved = 0;
    int64_t target = 0;
    double ratio = 0.0;  // achieved / target
};

// Exhaustive search over integer factors 1..cap for the policy whose realized
// conv+dense FLOPs is closest to the target; ties pick the smaller factor.
FlopsSearchResult flops_matched_search(const ArchSpec& arch, int64_t target_flops, ScaleMode mode,
                                       RepeatVariant variant, int cap = 16);

// Named desk-scale architectures ("paper-style", not paper-exact).
ArchSpec make_preset(const std::string& name);

std::string accounting_table(const RealizedPlan& plan);

// JSON schema: top-level keys "arch", "scale", "layers", "accounting".
void to_json(nlohmann::json& j, const LayerSpec& l);
void from_json(const nlohmann::json& j, LayerSpec& l);
void to_json(nlohmann::json& j, const ArchSpec& a);
void from_json(const nlohmann::json& j, ArchSpec& a);
void to_json(nlohmann::json& j, const ScalePolicy& p);
void from_json(const nlohmann::json& j, ScalePolicy& p);
void to_json(nlohmann::json& j, const ConvPlan& c);
void from_json(const nlohmann::json& j, ConvPlan& c);
void to_json(nlohmann::json& j, const LayerPlan& l);
void from_json(const nlohmann::json& j, LayerPlan& l);
void to_json(nlohmann::json& j, const PlanAccounting& a);
void from_json(const nlohmann::json& j, PlanAccounting& a);
void to_json(nlohmann::json& j, const RealizedPlan& p);
void from_json(const nlohmann::json& j, RealizedPlan& p);

}  // namespace repeatnet
