#include <algorithm>
#include <cmath>
#include <numbers>

#include "clickmask/engines.hpp"
#include "clickmask/maxflow.hpp"
#include "clickmask/sequence.hpp"

namespace clickmask {
namespace {

constexpr double kRefineProbabilityFloor = 1e-4;

// Inclusive-rectangle sums over a row-major plane.
class IntegralImage {
public:
    IntegralImage(int w, int h) : w_(w), sums_(static_cast<std::size_t>(w + 1) * (h + 1), 0.0) {}

    template <class F>
    void build(int h, F value) {
        for (int y = 0; y < h; ++y) {
            double row = 0.0;
            for (int x = 0; x < w_; ++x) {
                row += value(x, y);
                sums_[idx(x + 1, y + 1)] = sums_[idx(x + 1, y)] + row;
            }
        }
    }

    double sum(int x0, int y0, int x1, int y1) const {
        return sums_[idx(x1 + 1, y1 + 1)] - sums_[idx(x0, y1 + 1)] - sums_[idx(x1 + 1, y0)] + sums_[idx(x0, y0)];
    }

private:
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (w_ + 1) + x; }
    int w_;
    std::vector<double> sums_;
};

int grid_offset(int stride, int extent) { return std::min(stride / 2, extent - 1); }

int grid_count(int stride, int extent) { return (extent - 1 - grid_offset(stride, extent)) / stride + 1; }

int nearest_grid(int v, int stride, int offset, int count) {
    const int i = static_cast<int>(std::floor((v - offset) / static_cast<double>(stride) + 0.5));
    return std::clamp(i, 0, count - 1);
}

struct Match {
    double d2;
    int disp2;
    std::size_t order;
    const MemoryBank::Entry* entry;
    int dx, dy;
};

bool match_less(const Match& a, const Match& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.disp2 != b.disp2) return a.disp2 < b.disp2;
    return a.order < b.order;
}

double patch_ssd(const RasterImage& a, int ax, int ay, const RasterImage& b, int bx, int by, int half) {
    const int w = a.width(), h = a.height();
    double ssd = 0.0;
    for (int v = -half; v <= half; ++v)
        for (int u = -half; u <= half; ++u) {
            const int x0 = std::clamp(ax + u, 0, w - 1), y0 = std::clamp(ay + v, 0, h - 1);
            const int x1 = std::clamp(bx + u, 0, w - 1), y1 = std::clamp(by + v, 0, h - 1);
            for (int c = 0; c < a.channels(); ++c) {
                const double d = a.scaled(x0, y0, c) - b.scaled(x1, y1, c);
                ssd += d * d;
            }
        }
    return ssd;
}

// Moves a grid-to-grid displacement to the in-bounds pixel offset within
// +-radius with the lowest patch SSD; ties keep the smaller shift.
void refine_displacement(const RasterImage& target, const RasterImage& memory, int gx, int gy, int radius, int half,
                         Match& m) {
    if (radius == 0) return;
    int best_dx = m.dx, best_dy = m.dy, best_shift = 0;
    double best = patch_ssd(target, gx, gy, memory, gx + m.dx, gy + m.dy, half);
    for (int oy = -radius; oy <= radius; ++oy)
        for (int ox = -radius; ox <= radius; ++ox) {
            const int sx = gx + m.dx + ox, sy = gy + m.dy + oy;
            if ((ox == 0 && oy == 0) || sx < 0 || sy < 0 || sx >= memory.width() || sy >= memory.height()) continue;
            const double ssd = patch_ssd(target, gx, gy, memory, sx, sy, half);
            const int shift = ox * ox + oy * oy;
            if (ssd < best || (ssd == best && shift < best_shift)) {
                best = ssd;
                best_shift = shift;
                best_dx = m.dx + ox;
                best_dy = m.dy + oy;
            }
        }
    m.dx = best_dx;
    m.dy = best_dy;
}

void check_frame_mask(const RasterImage& frame, const LabelMask& mask) {
    if (mask.width() != frame.width() || mask.height() != frame.height())
        throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ from the frame");
}

// Binary graph-cut clean-up of a transferred mask. Pixels decided by exact
// static matches are hard-constrained.
void refine(const RasterImage& target, const PropagationParams& params, std::uint16_t fg_label,
            const std::vector<double>& fg_share, const std::vector<std::uint8_t>& fixed, TransferResult& result) {
    const std::size_t n = target.pixel_count();
    const auto edges = contrast_edges(target, params.refine_lambda);
    std::vector<double> incident(n, 0.0);
    for (const auto& e : edges) {
        incident[static_cast<std::size_t>(e.a)] += e.cap;
        incident[static_cast<std::size_t>(e.b)] += e.cap;
    }
    const double hard = 1.0 - std::log(kRefineProbabilityFloor) +
                        (incident.empty() ? 0.0 : *std::max_element(incident.begin(), incident.end()));

    MaxFlowGraph<double> graph(static_cast<int>(n), edges.size());
    for (std::size_t p = 0; p < n; ++p) {
        if (fixed[p]) {
            const bool fg = result.mask[p] != 0;
            graph.add_terminal(static_cast<int>(p), fg ? hard : 0.0, fg ? 0.0 : hard);
            continue;
        }
        const double pf = std::clamp(fg_share[p], kRefineProbabilityFloor, 1.0 - kRefineProbabilityFloor);
        graph.add_terminal(static_cast<int>(p), -std::log(1.0 - pf), -std::log(pf));
    }
    for (const auto& e : edges) graph.add_edge(e.a, e.b, e.cap, e.cap);
    graph.solve();
    for (std::size_t p = 0; p < n; ++p) {
        const bool fg = graph.in_source_set(static_cast<int>(p));
        if (fg != (result.mask[p] != 0)) {
            result.mask[p] = fg ? fg_label : 0;
            result.confidence[p] = fg ? fg_share[p] : 1.0 - fg_share[p];
        }
    }
}

}  // namespace

void FrameSequence::validate() const {
    if (frames.empty()) throw Error(ErrorCode::EmptyInput, "sequence has no frames");
    const RasterImage& f0 = frames.front();
    if (f0.empty()) throw Error(ErrorCode::EmptyInput, "sequence frame 0 is empty");
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const RasterImage& f = frames[i];
        if (f.width() != f0.width() || f.height() != f0.height() || f.channels() != f0.channels() ||
            f.bit_depth() != f0.bit_depth())
            throw Error(ErrorCode::DimensionMismatch, "frame " + std::to_string(i) + " differs in shape from frame 0");
    }
}

void PropagationParams::validate() const {
    if (grid_stride < 1 || patch_size < 1 || search_window < 1 || knn < 1 || memory_frames < 0)
        throw Error(ErrorCode::InvalidArgument, "propagation parameters must be positive");
    if (patch_size % 2 == 0) throw Error(ErrorCode::InvalidArgument, "patch_size must be odd");
    if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
    if (!(refine_lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "refine_lambda must be non-negative");
}

int DescriptorSet::grid_x(int column) const { return grid_offset(stride, width) + column * stride; }
int DescriptorSet::grid_y(int row) const { return grid_offset(stride, height) + row * stride; }

DescriptorSet extract_descriptors(const RasterImage& frame, const LabelMask* mask, const PropagationParams& params) {
    params.validate();
    if (frame.empty()) throw Error(ErrorCode::EmptyInput, "extract_descriptors: empty frame");
    if (mask) check_frame_mask(frame, *mask);
    const int w = frame.width(), h = frame.height(), ch = frame.channels();
    const std::vector<double> f = frame.scaled_features();
    const double max_value = frame.max_value();

    DescriptorSet out;
    out.width = w;
    out.height = h;
    out.stride = params.grid_stride;
    out.columns = grid_count(params.grid_stride, w);
    out.rows = grid_count(params.grid_stride, h);
    out.dim = 2 * ch + kOrientationBins;
    out.values.resize(out.count() * out.dim);
    if (mask) out.labels.resize(out.count());

    std::vector<IntegralImage> sums, squares;
    for (int c = 0; c < ch; ++c) {
        // Raw integer samples keep the sums exact, so flat patches get zero spread.
        auto at = [&](int x, int y) { return static_cast<double>(frame.at(x, y, c)); };
        sums.emplace_back(w, h);
        sums.back().build(h, at);
        squares.emplace_back(w, h);
        squares.back().build(h, [&](int x, int y) { return at(x, y) * at(x, y); });
    }

    // Gradients of the channel-mean intensity, central differences clamped at the border.
    std::vector<double> intensity(static_cast<std::size_t>(w) * h, 0.0);
    for (std::size_t p = 0; p < intensity.size(); ++p) {
        for (int c = 0; c < ch; ++c) intensity[p] += f[p * ch + c];
        intensity[p] /= ch;
    }
    auto I = [&](int x, int y) {
        return intensity[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
    };
    std::vector<IntegralImage> bins(kOrientationBins, IntegralImage(w, h));
    std::vector<double> magnitude(intensity.size());
    std::vector<int> bin_of(intensity.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = 0.5 * (I(x + 1, y) - I(x - 1, y)), gy = 0.5 * (I(x, y + 1) - I(x, y - 1));
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            magnitude[p] = std::hypot(gx, gy);
            const double angle = std::atan2(gy, gx) + std::numbers::pi;  // [0, 2pi]
            bin_of[p] = static_cast<int>(angle / (2.0 * std::numbers::pi) * kOrientationBins) % kOrientationBins;
        }
    for (int b = 0; b < kOrientationBins; ++b) {
        bins[b].build(h, [&](int x, int y) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            return bin_of[p] == b ? magnitude[p] : 0.0;
        });
    }

    const int half = params.patch_size / 2;
    for (int r = 0; r < out.rows; ++r) {
        for (int c = 0; c < out.columns; ++c) {
            const int gx = out.grid_x(c), gy = out.grid_y(r);
            const int x0 = std::max(0, gx - half), x1 = std::min(w - 1, gx + half);
            const int y0 = std::max(0, gy - half), y1 = std::min(h - 1, gy + half);
            const double area = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
            const std::size_t i = static_cast<std::size_t>(r) * out.columns + c;
            double* d = out.values.data() + i * out.dim;
            for (int k = 0; k < ch; ++k) {
                const double s = sums[k].sum(x0, y0, x1, y1), q = squares[k].sum(x0, y0, x1, y1);
                const double var = std::max(0.0, area * q - s * s) / (area * area);
                d[2 * k] = std::clamp(s / area / max_value, 0.0, 1.0);
                d[2 * k + 1] = std::min(1.0, std::sqrt(var) / max_value);
            }
            double total = 0.0;
            for (int b = 0; b < kOrientationBins; ++b) total += d[2 * ch + b] = bins[b].sum(x0, y0, x1, y1);
            for (int b = 0; b < kOrientationBins; ++b) {
                // Flat patches leave tiny rounding residue in the integral sums.
                d[2 * ch + b] = total > 1e-9 ? std::clamp(d[2 * ch + b] / total, 0.0, 1.0) : 0.0;
            }
            if (mask) out.labels[i] = mask->at(gx, gy);
        }
    }
    return out;
}

void MemoryBank::set_reference(int frame_index, RasterImage frame, LabelMask mask, const PropagationParams& params) {
    DescriptorSet d = extract_descriptors(frame, &mask, params);
    reference_ = Entry{frame_index, std::move(frame), std::move(d), std::move(mask)};
}

void MemoryBank::push(int frame_index, RasterImage frame, LabelMask mask, const PropagationParams& params) {
    DescriptorSet d = extract_descriptors(frame, &mask, params);
    recent_.push_back(Entry{frame_index, std::move(frame), std::move(d), std::move(mask)});
    while (recent_.size() > max_recent_) recent_.pop_front();
}

std::vector<const MemoryBank::Entry*> MemoryBank::entries() const {
    std::vector<const Entry*> out;
    if (reference_) out.push_back(&*reference_);
    for (const auto& e : recent_) out.push_back(&e);
    return out;
}

TransferResult transfer_labels(const RasterImage& target, const MemoryBank& memory, const PropagationParams& params) {
    params.validate();
    if (memory.empty()) throw Error(ErrorCode::EmptyInput, "transfer_labels: memory bank is empty");
    const auto entries = memory.entries();
    const DescriptorSet t = extract_descriptors(target, nullptr, params);
    for (const auto* e : entries) {
        if (e->descriptors.width != t.width || e->descriptors.height != t.height || e->descriptors.dim != t.dim ||
            e->descriptors.stride != t.stride)
            throw Error(ErrorCode::DimensionMismatch, "memory frame " + std::to_string(e->frame_index) +
                                                          " does not match the target frame");
    }

    const int stride = t.stride, win = params.search_window;
    const int off_x = grid_offset(stride, t.width), off_y = grid_offset(stride, t.height);
    std::vector<std::vector<Match>> matches(t.count());
    std::vector<std::vector<double>> weights(t.count());
    std::vector<std::uint8_t> is_static(t.count(), 0);
    std::vector<Match> pool;
    for (int r = 0; r < t.rows; ++r) {
        for (int c = 0; c < t.columns; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * t.columns + c;
            const auto td = t.descriptor(i);
            const int gx = t.grid_x(c), gy = t.grid_y(r);
            const int c0 = std::max(0, static_cast<int>(std::ceil((gx - win - off_x) / static_cast<double>(stride))));
            const int c1 = std::min(t.columns - 1, (gx + win - off_x) / stride);
            const int r0 = std::max(0, static_cast<int>(std::ceil((gy - win - off_y) / static_cast<double>(stride))));
            const int r1 = std::min(t.rows - 1, (gy + win - off_y) / stride);
            pool.clear();
            for (std::size_t e = 0; e < entries.size(); ++e) {
                const DescriptorSet& md = entries[e]->descriptors;
                for (int mr = r0; mr <= r1; ++mr)
                    for (int mc = c0; mc <= c1; ++mc) {
                        const std::size_t j = static_cast<std::size_t>(mr) * md.columns + mc;
                        const auto d = md.descriptor(j);
                        double d2 = 0.0;
                        for (int k = 0; k < t.dim; ++k) d2 += (td[k] - d[k]) * (td[k] - d[k]);
                        const int dx = md.grid_x(mc) - gx, dy = md.grid_y(mr) - gy;
                        pool.push_back(Match{d2, dx * dx + dy * dy, e * md.count() + j, entries[e], dx, dy});
                    }
            }
            if (pool.empty()) continue;
            const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.knn), pool.size());
            std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), match_less);
            if (pool[0].d2 == 0.0 && pool[0].disp2 == 0) {
                is_static[i] = 1;
                matches[i].assign(pool.begin(), pool.begin() + 1);
                weights[i] = {1.0};
                continue;
            }
            matches[i].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
            for (auto& m : matches[i]) refine_displacement(target, m.entry->frame, gx, gy, stride / 2, params.patch_size / 2, m);
            double mean = 0.0;
            for (const auto& m : matches[i]) mean += m.d2;
            mean /= static_cast<double>(k);
            for (const auto& m : matches[i]) weights[i].push_back(mean > 0.0 ? std::exp(-m.d2 / mean) : 1.0);
        }
    }

    const int w = target.width(), h = target.height();
    TransferResult out{LabelMask(w, h), std::vector<double>(target.pixel_count(), 0.0)};
    std::vector<double> fg_share(target.pixel_count(), 0.5);
    std::vector<std::uint8_t> fixed(target.pixel_count(), 0);
    std::vector<std::pair<std::uint16_t, double>> votes;
    std::uint16_t fg_label = 0;
    bool binary = true;
    for (int y = 0; y < h; ++y) {
        const int r = nearest_grid(y, stride, off_y, t.rows);
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(r) * t.columns + nearest_grid(x, stride, off_x, t.columns);
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            votes.clear();
            double total = 0.0, fg = 0.0;
            for (std::size_t k = 0; k < matches[i].size(); ++k) {
                const Match& m = matches[i][k];
                const int sx = x + m.dx, sy = y + m.dy;
                if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
                const std::uint16_t label = m.entry->mask.at(sx, sy);
                const double wk = weights[i][k];
                auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == label; });
                if (it == votes.end()) votes.emplace_back(label, wk);
                else it->second += wk;
                total += wk;
                if (label != 0) fg += wk;
            }
            if (total <= 0.0) continue;  // unmatched: label 0, confidence 0
            std::pair<std::uint16_t, double> best = votes.front();
            for (const auto& v : votes)
                if (v.second > best.second || (v.second == best.second && v.first < best.first)) best = v;
            out.mask[p] = best.first;
            out.confidence[p] = best.second / total;
            fg_share[p] = fg / total;
            fixed[p] = is_static[i];
            for (const auto& v : votes) {
                if (v.first == 0) continue;
                if (fg_label == 0) fg_label = v.first;
                else if (v.first != fg_label) binary = false;
            }
        }
    }
    // Multi-label transfers are left unrefined.
    if (params.refine_with_graphcut && binary && fg_label != 0) refine(target, params, fg_label, fg_share, fixed, out);
    return out;
}

FusedFrame fuse(std::span<const FusionCandidate> candidates, double tau) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyInput, "fuse: no candidates");
    if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "fuse: tau must be positive");
    const int w = candidates[0].mask.width(), h = candidates[0].mask.height();
    const std::size_t n = candidates[0].mask.pixel_count();
    for (const auto& c : candidates) {
        if (c.mask.width() != w || c.mask.height() != h || c.confidence.size() != n)
            throw Error(ErrorCode::DimensionMismatch, "fuse: candidate dimensions differ");
    }
    // Candidate precedence for ties: nearer first, then lower reference index.
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].dt != candidates[b].dt) return candidates[a].dt < candidates[b].dt;
        return candidates[a].reference < candidates[b].reference;
    });
    std::vector<double> decay(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) decay[i] = std::exp(-candidates[i].dt / tau);

    FusedFrame out{LabelMask(w, h), std::vector<double>(n, 0.0), candidates[order[0]].reference};
    struct Tally {
        std::uint16_t label;
        double weight;
        std::size_t rank;  // best precedence among its voters
        double confidence;
    };
    std::vector<Tally> tally;
    for (std::size_t p = 0; p < n; ++p) {
        tally.clear();
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            const FusionCandidate& c = candidates[order[rank]];
            const double conf = c.confidence[p] * decay[order[rank]];
            const std::uint16_t label = c.mask[p];
            auto it = std::find_if(tally.begin(), tally.end(), [&](const Tally& t) { return t.label == label; });
            if (it == tally.end()) {
                tally.push_back(Tally{label, conf, rank, conf});
            } else {
                it->weight += conf;
                it->confidence = std::max(it->confidence, conf);
            }
        }
        const Tally* best = &tally.front();
        for (const auto& t : tally)
            if (t.weight > best->weight || (t.weight == best->weight && t.rank < best->rank)) best = &t;
        out.mask[p] = best->label;
        out.confidence[p] = best->confidence;
    }
    return out;
}

std::vector<FusedFrame> propagate(const FrameSequence& sequence, const ReferenceSet& references,
                                  const PropagationParams& params, const ProgressFn& progress) {
    params.validate();
    sequence.validate();
    if (references.empty()) throw Error(ErrorCode::EmptyInput, "propagate: at least one reference frame required");
    const int n = static_cast<int>(sequence.size());
    for (const auto& [index, mask] : references) {
        if (index < 0 || index >= n)
            throw Error(ErrorCode::OutOfRange, "reference index " + std::to_string(index) + " outside the sequence");
        check_frame_mask(sequence.frames[static_cast<std::size_t>(index)], mask);
    }

    // Each direction stops before the next reference.
    struct Run {
        int reference, direction, limit;
    };
    std::vector<Run> runs;
    int total = 0;
    for (auto it = references.begin(); it != references.end(); ++it) {
        const int r = it->first;
        const int prev = it == references.begin() ? -1 : std::prev(it)->first;
        const int next = std::next(it) == references.end() ? n : std::next(it)->first;
        runs.push_back(Run{r, +1, next});
        runs.push_back(Run{r, -1, prev});
        total += (next - r - 1) + (r - prev - 1);
    }

    std::vector<std::vector<FusionCandidate>> candidates(static_cast<std::size_t>(n));
    int done = 0;
    if (progress) progress(done, total);
    for (const Run& run : runs) {
        const LabelMask& ref_mask = references.at(run.reference);
        MemoryBank bank(static_cast<std::size_t>(params.memory_frames));
        bank.set_reference(run.reference, sequence.frames[static_cast<std::size_t>(run.reference)], ref_mask, params);
        for (int t = run.reference + run.direction; t != run.limit; t += run.direction) {
            const RasterImage& frame = sequence.frames[static_cast<std::size_t>(t)];
            TransferResult res;
            try {
                res = transfer_labels(frame, bank, params);
            } catch (const Error& e) {
                throw Error(e.code(), "propagation to frame " + std::to_string(t) + ": " + e.what());
            }
            if (params.memory_frames > 0) bank.push(t, frame, res.mask, params);
            candidates[static_cast<std::size_t>(t)].push_back(
                FusionCandidate{std::move(res.mask), std::move(res.confidence), std::abs(t - run.reference), run.reference});
            if (progress) progress(++done, total);
        }
    }

    std::vector<FusedFrame> out(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        if (const auto it = references.find(t); it != references.end()) {
            out[static_cast<std::size_t>(t)] =
                FusedFrame{it->second, std::vector<double>(it->second.pixel_count(), 1.0), t};
        } else {
            out[static_cast<std::size_t>(t)] = fuse(candidates[static_cast<std::size_t>(t)], params.tau);
        }
    }
    return out;
}

}  // namespace clickmask
