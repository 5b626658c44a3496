#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ean/attention.hpp"
#include "ean/dataset.hpp"
#include "ean/scheme.hpp"
#include "ean/tensor.hpp"

namespace ean {

enum class Sharing { PerBlock, PerStage };

struct StageSpec {
    int blocks = 1;
    std::size_t channels = 8;
};

struct BackboneConfig {
    std::vector<StageSpec> stages{{4, 4}, {4, 8}};
    std::size_t in_channels = 1;
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t classes = 4;
    SamKind sam = SamKind::SE;
    Sharing sharing = Sharing::PerBlock;
    int se_reduction = 4;
    std::size_t sge_groups = 4;
    double sge_epsilon = 1e-5;
    // Multiplies the He std of each block's second conv. Without batch norm,
    // unscaled residual branches double the activation variance per block.
    double residual_init_scale = 0.25;

    void validate() const;
    std::size_t block_count() const;
    std::vector<int> stage_blocks() const;
};

/// Geometry of one residual block. The first block of every stage after the
/// first halves the spatial size and changes width through a 1x1 projection.
struct BlockLayout {
    int stage = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    int stride = 1;
    std::size_t out_height = 0;
    std::size_t out_width = 0;
    bool projection = false;
};

std::vector<BlockLayout> block_layouts(const BackboneConfig& config);

struct ParamCount {
    std::size_t backbone = 0;
    std::size_t extra_sam = 0;
};

/// Extra SAM parameters count connected blocks (per-block mode) or stages
/// with at least one connection (shared mode).
ParamCount count_params(const BackboneConfig& config, const ConnectionScheme& a);

/// Analytic multiply-accumulate counts for one forward pass. An SE block
/// adds 2*C*(C//r) + C//r + C MACs plus C*H*W recalibration multiplies; an
/// SGE block adds C*H*W (importance) + 3*G*H*W (normalise, affine) + C*H*W.
struct FlopCount {
    double backbone = 0.0;
    double extra_sam = 0.0;
    double increment_pct() const { return backbone > 0.0 ? 100.0 * extra_sam / backbone : 0.0; }
};
FlopCount count_flops(const BackboneConfig& config, const ConnectionScheme& a);

/// Residual backbone with one attention module per block (or per stage when
/// shared). Every scheme is evaluated against the same weights.
class Supernet {
public:
    Supernet(BackboneConfig config, std::uint64_t seed);

    const BackboneConfig& config() const noexcept { return config_; }
    std::size_t block_count() const noexcept { return layouts_.size(); }
    const std::vector<BlockLayout>& layouts() const noexcept { return layouts_; }

    Tensor forward(const Tensor& x, const ConnectionScheme& a) const;
    /// Same as forward; also records every block's output.
    Tensor forward_trace(const Tensor& x, const ConnectionScheme& a, std::vector<Tensor>& block_outputs) const;

    /// Adds d(loss)/d(params) for one sample to the gradient buffers and
    /// returns the cross-entropy loss.
    double accumulate_gradients(const Sample& sample, const ConnectionScheme& a);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<Parameter*> backbone_parameters();
    /// Backbone plus the SAM slots used by at least one connected block.
    std::vector<Parameter*> active_parameters(const ConnectionScheme& a);
    void zero_grad();

    std::size_t sam_slot(std::size_t block) const;
    std::size_t sam_slot_count() const noexcept { return sams_.size(); }
    SamParams& sam(std::size_t slot) { return sams_.at(slot); }
    const SamParams& sam(std::size_t slot) const { return sams_.at(slot); }

    std::uint64_t steps_trained = 0;

private:
    struct Block {
        Parameter conv1;
        Parameter conv2;
        Parameter proj;  // empty unless layout.projection
    };

    struct BlockCache;
    Tensor run(const Tensor& x, const ConnectionScheme& a, std::vector<BlockCache>* caches,
               std::vector<Tensor>* block_outputs, Tensor* pooled, Tensor* stem_pre) const;
    void check_scheme(const ConnectionScheme& a) const;

    BackboneConfig config_;
    std::vector<BlockLayout> layouts_;
    Parameter stem_;
    std::vector<Block> blocks_;
    std::vector<SamParams> sams_;
    Parameter fc_w_;
    Parameter fc_b_;
};

/// Epoch-wise shuffled mini-batch indices.
class BatchSampler {
public:
    BatchSampler(std::size_t dataset_size, std::mt19937_64 rng);
    std::vector<std::size_t> next(std::size_t batch_size);

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::mt19937_64 rng_;
};

/// One optimizer step on a mini-batch under scheme a. SAM parameters of
/// disconnected blocks are left untouched (no momentum or decay update).
double train_step(Supernet& net, const Dataset& data, std::span<const std::size_t> batch, const ConnectionScheme& a,
                  const OptimizerConfig& optimizer);

struct PretrainOptions {
    double beta = 0.5;
    std::size_t steps = 400;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer{0.02, 0.9, 1e-4};
};

/// Each step draws a fresh Bernoulli(beta) scheme from mask_rng and trains
/// the corresponding subnetwork on one mini-batch. Returns the mean loss of
/// the final 10% of steps.
double pretrain_supernet(Supernet& net, const Dataset& train, const PretrainOptions& options, std::mt19937_64& mask_rng,
                         BatchSampler& batches);

/// Standalone training of one fixed scheme.
double train_fixed_scheme(Supernet& net, const Dataset& train, const ConnectionScheme& a, const PretrainOptions& options,
                          BatchSampler& batches);

/// Fraction of correctly classified samples.
double evaluate_scheme(const Supernet& net, const ConnectionScheme& a, const Dataset& validation);

/// 100 * (t(a) - t(0^m)) / t(0^m) with t the median wall-clock time of a
/// forward pass over the probe batch.
double inference_time_increment(const Supernet& net, const ConnectionScheme& a, std::span<const Tensor> probe,
                                 int repetitions);

}  // namespace ean
