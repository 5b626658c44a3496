#include "ean/supernet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ean/ops.hpp"
#include "ean/rng.hpp"

namespace ean {

namespace {

Tensor he_gaussian(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : t.data()) v = dist(rng);
    return t;
}

std::size_t conv_extent(std::size_t in, int stride) { return (in + 2 - 3) / static_cast<std::size_t>(stride) + 1; }

}  // namespace

void BackboneConfig::validate() const {
    if (stages.empty()) throw std::invalid_argument("backbone needs at least one stage");
    for (const auto& s : stages) {
        if (s.blocks < 1) throw std::invalid_argument("every stage needs at least one block");
        if (s.channels < 1) throw std::invalid_argument("stage channel width must be positive");
    }
    if (in_channels < 1 || height < 1 || width < 1) throw std::invalid_argument("input shape must be positive");
    if (classes < 2) throw std::invalid_argument("need at least two classes");
    for (const auto& s : stages) {
        if (sam == SamKind::SE) {
            SEParams::count(s.channels, se_reduction);  // validates C//r >= 1
        } else {
            if (sge_groups < 1 || sge_groups > s.channels) {
                throw std::invalid_argument("SGE groups must be in [1, C] for every stage");
            }
        }
    }
    if (!(residual_init_scale >= 0.0)) throw std::invalid_argument("residual_init_scale must be >= 0");
    if (!(sge_epsilon > 0.0)) throw std::invalid_argument("SGE epsilon must be positive");
}

std::size_t BackboneConfig::block_count() const {
    std::size_t m = 0;
    for (const auto& s : stages) m += static_cast<std::size_t>(s.blocks);
    return m;
}

std::vector<int> BackboneConfig::stage_blocks() const {
    std::vector<int> out;
    for (const auto& s : stages) out.push_back(s.blocks);
    return out;
}

std::vector<BlockLayout> block_layouts(const BackboneConfig& config) {
    config.validate();
    std::vector<BlockLayout> out;
    std::size_t ch = config.stages.front().channels;
    std::size_t h = config.height, w = config.width;
    for (std::size_t s = 0; s < config.stages.size(); ++s) {
        for (int b = 0; b < config.stages[s].blocks; ++b) {
            BlockLayout l;
            l.stage = static_cast<int>(s);
            l.in_channels = ch;
            l.out_channels = config.stages[s].channels;
            l.stride = (s > 0 && b == 0) ? 2 : 1;
            l.projection = l.stride != 1 || l.in_channels != l.out_channels;
            h = conv_extent(h, l.stride);
            w = conv_extent(w, l.stride);
            l.out_height = h;
            l.out_width = w;
            ch = l.out_channels;
            out.push_back(l);
        }
    }
    return out;
}

namespace {

std::size_t sam_count_for(const BackboneConfig& config, std::size_t channels) {
    return config.sam == SamKind::SE ? SEParams::count(channels, config.se_reduction)
                                     : SGEParams::count(channels, config.sge_groups);
}

}  // namespace

ParamCount count_params(const BackboneConfig& config, const ConnectionScheme& a) {
    const auto layouts = block_layouts(config);
    if (a.size() != layouts.size()) throw std::invalid_argument("scheme length does not match block count");
    ParamCount pc;
    const std::size_t c0 = config.stages.front().channels;
    pc.backbone += c0 * config.in_channels * 9;
    for (const auto& l : layouts) {
        pc.backbone += l.out_channels * l.in_channels * 9 + l.out_channels * l.out_channels * 9;
        if (l.projection) pc.backbone += l.out_channels * l.in_channels;
    }
    pc.backbone += layouts.back().out_channels * config.classes + config.classes;

    if (config.sharing == Sharing::PerBlock) {
        for (std::size_t i = 0; i < layouts.size(); ++i) {
            if (a[i]) pc.extra_sam += sam_count_for(config, layouts[i].out_channels);
        }
    } else {
        std::vector<bool> used(config.stages.size(), false);
        for (std::size_t i = 0; i < layouts.size(); ++i) {
            if (a[i]) used[static_cast<std::size_t>(layouts[i].stage)] = true;
        }
        for (std::size_t s = 0; s < used.size(); ++s) {
            if (used[s]) pc.extra_sam += sam_count_for(config, config.stages[s].channels);
        }
    }
    return pc;
}

FlopCount count_flops(const BackboneConfig& config, const ConnectionScheme& a) {
    const auto layouts = block_layouts(config);
    if (a.size() != layouts.size()) throw std::invalid_argument("scheme length does not match block count");
    FlopCount fc;
    const double hw0 = static_cast<double>(config.height * config.width);
    fc.backbone += static_cast<double>(config.stages.front().channels * config.in_channels * 9) * hw0;
    for (std::size_t i = 0; i < layouts.size(); ++i) {
        const auto& l = layouts[i];
        const double hw = static_cast<double>(l.out_height * l.out_width);
        const double cin = static_cast<double>(l.in_channels), c = static_cast<double>(l.out_channels);
        fc.backbone += (c * cin * 9 + c * c * 9) * hw;
        if (l.projection) fc.backbone += c * cin * hw;
        if (!a[i]) continue;
        if (config.sam == SamKind::SE) {
            const double r = static_cast<double>(l.out_channels / static_cast<std::size_t>(config.se_reduction));
            fc.extra_sam += 2.0 * c * r + r + c + c * hw;
        } else {
            const double groups = static_cast<double>(sge_groups(l.out_channels, config.sge_groups).size());
            fc.extra_sam += c * hw + 3.0 * groups * hw + c * hw;
        }
    }
    fc.backbone += static_cast<double>(layouts.back().out_channels * config.classes);
    return fc;
}

struct Supernet::BlockCache {
    Tensor input;
    Tensor conv1_out;
    Tensor act1;
    Tensor residual;
    Tensor mask;
    SECache se;
    SGECache sge;
    bool connected = false;
};

Supernet::Supernet(BackboneConfig config, std::uint64_t seed) : config_(std::move(config)) {
    layouts_ = block_layouts(config_);
    auto rng = make_stream(seed, streams::kSupernetInit);
    const std::size_t c0 = config_.stages.front().channels;
    stem_ = Parameter("stem", he_gaussian({c0, config_.in_channels, 3, 3}, config_.in_channels * 9, rng));
    for (std::size_t i = 0; i < layouts_.size(); ++i) {
        const auto& l = layouts_[i];
        const std::string prefix = "block" + std::to_string(i);
        Block b;
        b.conv1 = Parameter(prefix + ".conv1",
                            he_gaussian({l.out_channels, l.in_channels, 3, 3}, l.in_channels * 9, rng));
        b.conv2 = Parameter(prefix + ".conv2",
                            he_gaussian({l.out_channels, l.out_channels, 3, 3}, l.out_channels * 9, rng));
        b.conv2.value *= config_.residual_init_scale;
        if (l.projection) {
            b.proj = Parameter(prefix + ".proj", he_gaussian({l.out_channels, l.in_channels, 1, 1}, l.in_channels, rng));
        }
        blocks_.push_back(std::move(b));
    }
    auto make_sam = [&](std::size_t channels, const std::string& prefix) -> SamParams {
        if (config_.sam == SamKind::SE) return SEParams::he_init(channels, config_.se_reduction, rng, prefix);
        SGEParams p = SGEParams::init(channels, config_.sge_groups, prefix);
        p.epsilon = config_.sge_epsilon;
        return p;
    };
    if (config_.sharing == Sharing::PerBlock) {
        for (std::size_t i = 0; i < layouts_.size(); ++i) {
            sams_.push_back(make_sam(layouts_[i].out_channels, "sam" + std::to_string(i)));
        }
    } else {
        for (std::size_t s = 0; s < config_.stages.size(); ++s) {
            sams_.push_back(make_sam(config_.stages[s].channels, "stage_sam" + std::to_string(s)));
        }
    }
    const std::size_t c_last = layouts_.back().out_channels;
    fc_w_ = Parameter("fc.w", he_gaussian({config_.classes, c_last}, c_last, rng));
    fc_b_ = Parameter("fc.b", Tensor({config_.classes}));
}

std::size_t Supernet::sam_slot(std::size_t block) const {
    if (block >= layouts_.size()) throw std::out_of_range("block index out of range");
    return config_.sharing == Sharing::PerBlock ? block : static_cast<std::size_t>(layouts_[block].stage);
}

void Supernet::check_scheme(const ConnectionScheme& a) const {
    if (a.size() != layouts_.size()) {
        throw std::invalid_argument("scheme has " + std::to_string(a.size()) + " bits but the supernet has " +
                                    std::to_string(layouts_.size()) + " blocks");
    }
}

Tensor Supernet::run(const Tensor& x, const ConnectionScheme& a, std::vector<BlockCache>* caches,
                     std::vector<Tensor>* block_outputs, Tensor* pooled, Tensor* stem_pre) const {
    check_scheme(a);
    if (x.shape() != Shape{config_.in_channels, config_.height, config_.width}) {
        throw std::invalid_argument("input shape " + shape_string(x.shape()) + " does not match backbone");
    }
    Tensor pre = conv2d(x, stem_.value, 1, 1);
    Tensor cur = relu(pre);
    if (stem_pre) *stem_pre = std::move(pre);
    if (caches) caches->resize(layouts_.size());
    if (block_outputs) block_outputs->clear();

    for (std::size_t i = 0; i < layouts_.size(); ++i) {
        const auto& l = layouts_[i];
        const auto& b = blocks_[i];
        Tensor c1 = conv2d(cur, b.conv1.value, l.stride, 1);
        Tensor r1 = relu(c1);
        Tensor f = conv2d(r1, b.conv2.value, 1, 1);
        Tensor shortcut = l.projection ? conv2d(cur, b.proj.value, l.stride, 0) : cur;
        Tensor mask;
        BlockCache* cache = caches ? &(*caches)[i] : nullptr;
        if (a[i]) {
            const SamParams& sp = sams_[sam_slot(i)];
            if (const auto* se = std::get_if<SEParams>(&sp)) {
                mask = cache ? se_forward(f, *se, cache->se) : se_attention(f, *se);
            } else {
                const auto& sge = std::get<SGEParams>(sp);
                mask = cache ? sge_forward(f, sge, cache->sge) : sge_attention(f, sge);
            }
        }
        Tensor out = recalibrate(shortcut, f, mask, a[i]);
        if (cache) {
            cache->input = std::move(cur);
            cache->conv1_out = std::move(c1);
            cache->act1 = std::move(r1);
            cache->residual = std::move(f);
            cache->mask = std::move(mask);
            cache->connected = a[i];
        }
        if (block_outputs) block_outputs->push_back(out);
        cur = std::move(out);
    }
    Tensor p = global_avg_pool(cur);
    Tensor logits = dense(p, fc_w_.value, fc_b_.value);
    if (pooled) *pooled = std::move(p);
    return logits;
}

Tensor Supernet::forward(const Tensor& x, const ConnectionScheme& a) const {
    return run(x, a, nullptr, nullptr, nullptr, nullptr);
}

Tensor Supernet::forward_trace(const Tensor& x, const ConnectionScheme& a, std::vector<Tensor>& block_outputs) const {
    return run(x, a, nullptr, &block_outputs, nullptr, nullptr);
}

double Supernet::accumulate_gradients(const Sample& sample, const ConnectionScheme& a) {
    std::vector<BlockCache> caches;
    Tensor pooled, stem_pre;
    const Tensor logits = run(sample.image, a, &caches, nullptr, &pooled, &stem_pre);
    auto [loss, grad_logits] = softmax_cross_entropy(logits, sample.label);

    Tensor grad_pooled;
    dense_backward(pooled, fc_w_.value, grad_logits, &grad_pooled, fc_w_.grad, fc_b_.grad);
    const auto& last = layouts_.back();
    Tensor grad = global_avg_pool_backward({last.out_channels, last.out_height, last.out_width}, grad_pooled);

    for (std::size_t i = layouts_.size(); i-- > 0;) {
        const auto& l = layouts_[i];
        auto& b = blocks_[i];
        auto& c = caches[i];
        Tensor grad_f;
        if (c.connected) {
            Tensor grad_mask;
            recalibrate_backward(c.residual, c.mask, grad, grad_f, grad_mask);
            SamParams& sp = sams_[sam_slot(i)];
            if (auto* se = std::get_if<SEParams>(&sp)) {
                se_backward(c.residual, *se, c.se, grad_mask, grad_f);
            } else {
                sge_backward(c.residual, std::get<SGEParams>(sp), c.sge, grad_mask, grad_f);
            }
        } else {
            grad_f = grad;
        }
        Tensor grad_in;
        if (l.projection) {
            conv2d_backward(c.input, b.proj.value, grad, l.stride, 0, &grad_in, b.proj.grad);
        } else {
            grad_in = grad;
        }
        Tensor grad_act1;
        conv2d_backward(c.act1, b.conv2.value, grad_f, 1, 1, &grad_act1, b.conv2.grad);
        const Tensor grad_c1 = relu_backward(c.conv1_out, grad_act1);
        Tensor grad_in_conv;
        conv2d_backward(c.input, b.conv1.value, grad_c1, l.stride, 1, &grad_in_conv, b.conv1.grad);
        grad_in += grad_in_conv;
        grad = std::move(grad_in);
    }
    const Tensor grad_stem = relu_backward(stem_pre, grad);
    conv2d_backward(sample.image, stem_.value, grad_stem, 1, 1, nullptr, stem_.grad);
    return loss;
}

std::vector<Parameter*> Supernet::backbone_parameters() {
    std::vector<Parameter*> out{&stem_};
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        out.push_back(&blocks_[i].conv1);
        out.push_back(&blocks_[i].conv2);
        if (layouts_[i].projection) out.push_back(&blocks_[i].proj);
    }
    out.push_back(&fc_w_);
    out.push_back(&fc_b_);
    return out;
}

std::vector<Parameter*> Supernet::parameters() {
    auto out = backbone_parameters();
    for (auto& s : sams_) {
        for (Parameter* p : sam_parameters(s)) out.push_back(p);
    }
    return out;
}

std::vector<const Parameter*> Supernet::parameters() const {
    auto mut = const_cast<Supernet*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<Parameter*> Supernet::active_parameters(const ConnectionScheme& a) {
    check_scheme(a);
    auto out = backbone_parameters();
    std::vector<bool> used(sams_.size(), false);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]) used[sam_slot(i)] = true;
    }
    for (std::size_t s = 0; s < sams_.size(); ++s) {
        if (!used[s]) continue;
        for (Parameter* p : sam_parameters(sams_[s])) out.push_back(p);
    }
    return out;
}

void Supernet::zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::mt19937_64 rng) : order_(dataset_size), rng_(std::move(rng)) {
    if (dataset_size == 0) throw std::invalid_argument("cannot sample batches from an empty dataset");
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> BatchSampler::next(std::size_t batch_size) {
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    while (out.size() < batch_size) {
        if (cursor_ == order_.size()) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            cursor_ = 0;
        }
        out.push_back(order_[cursor_++]);
    }
    return out;
}

double train_step(Supernet& net, const Dataset& data, std::span<const std::size_t> batch, const ConnectionScheme& a,
                  const OptimizerConfig& optimizer) {
    if (batch.empty()) throw std::invalid_argument("empty mini-batch");
    net.zero_grad();
    double loss = 0.0;
    for (std::size_t idx : batch) loss += net.accumulate_gradients(data.samples.at(idx), a);
    const double scale = 1.0 / static_cast<double>(batch.size());
    auto active = net.active_parameters(a);
    for (Parameter* p : active) p->grad *= scale;
    sgd_momentum_step(active, optimizer);
    ++net.steps_trained;
    return loss * scale;
}

namespace {

template <typename SchemeFn>
double run_training(Supernet& net, const Dataset& train, const PretrainOptions& options, BatchSampler& batches,
                    SchemeFn&& next_scheme) {
    if (train.empty()) throw std::invalid_argument("training set is empty");
    options.optimizer.validate();
    if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    const std::size_t tail_from = options.steps - std::max<std::size_t>(1, options.steps / 10);
    double tail_loss = 0.0;
    std::size_t tail_n = 0;
    for (std::size_t t = 0; t < options.steps; ++t) {
        const ConnectionScheme a = next_scheme();
        const auto batch = batches.next(options.batch_size);
        const double loss = train_step(net, train, batch, a, options.optimizer);
        if (t >= tail_from) {
            tail_loss += loss;
            ++tail_n;
        }
    }
    return tail_n ? tail_loss / static_cast<double>(tail_n) : 0.0;
}

}  // namespace

double pretrain_supernet(Supernet& net, const Dataset& train, const PretrainOptions& options, std::mt19937_64& mask_rng,
                         BatchSampler& batches) {
    const std::size_t m = net.block_count();
    return run_training(net, train, options, batches,
                        [&] { return sample_bernoulli_scheme(options.beta, m, mask_rng); });
}

double train_fixed_scheme(Supernet& net, const Dataset& train, const ConnectionScheme& a, const PretrainOptions& options,
                          BatchSampler& batches) {
    return run_training(net, train, options, batches, [&] { return a; });
}

double evaluate_scheme(const Supernet& net, const ConnectionScheme& a, const Dataset& validation) {
    if (validation.empty()) throw std::invalid_argument("validation set is empty");
    std::size_t correct = 0;
    for (const auto& s : validation.samples) {
        if (argmax(net.forward(s.image, a)) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(validation.size());
}

double inference_time_increment(const Supernet& net, const ConnectionScheme& a, std::span<const Tensor> probe,
                                int repetitions) {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (a.ones_count() == 0) return 0.0;
    const auto base = ConnectionScheme::zeros(a.size());
    auto time_once = [&](const ConnectionScheme& s) {
        const auto t0 = std::chrono::steady_clock::now();
        double sink = 0.0;
        for (const auto& x : probe) sink += net.forward(x, s)[0];
        const auto t1 = std::chrono::steady_clock::now();
        volatile double keep = sink;
        (void)keep;
        return std::chrono::duration<double>(t1 - t0).count();
    };
    std::vector<double> with, without;
    for (int r = 0; r < repetitions; ++r) {
        without.push_back(time_once(base));
        with.push_back(time_once(a));
    }
    auto median = [](std::vector<double>& v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    const double t_base = median(without);
    return 100.0 * (median(with) - t_base) / t_base;
}

}  // namespace ean
