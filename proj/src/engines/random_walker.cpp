#include <algorithm>
#include <cmath>
#include <sstream>

#include "engine_common.hpp"

namespace clickmask {
namespace {

constexpr double kWeightFloor = 1e-6;

// Symmetric graph Laplacian with Dirichlet terms folded into the diagonal:
// A = diag - W, with W stored as positive off-diagonal weights in CSR form.
struct SparseLaplacian {
    std::vector<double> diag;
    std::vector<int> row_start{0};
    std::vector<int> cols;
    std::vector<double> weights;

    std::size_t size() const noexcept { return diag.size(); }

    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        for (std::size_t i = 0; i < diag.size(); ++i) {
            double s = diag[i] * x[i];
            for (int k = row_start[i]; k < row_start[i + 1]; ++k) s -= weights[k] * x[cols[k]];
            y[i] = s;
        }
    }
};

// System over the unseeded pixels of a 4-connected grid.
struct LaplacianSystem {
    std::vector<int> unknown_of;  // pixel -> unknown index, -1 if seeded
    std::vector<int> pixel_of;    // unknown index -> pixel
    SparseLaplacian a;
    std::vector<double> rhs;
};

LaplacianSystem build_system(const EngineParams& params, const RasterImage& image, const SeedMasks& seeds,
                             const EdgeMap& prior) {
    const int w = image.width(), h = image.height(), ch = image.channels();
    const std::size_t n = image.pixel_count();
    const std::vector<double> features = image.scaled_features();

    LaplacianSystem sys;
    sys.unknown_of.assign(n, -1);
    for (std::size_t p = 0; p < n; ++p) {
        if (!seeds.positive[p] && !seeds.negative[p]) {
            sys.unknown_of[p] = static_cast<int>(sys.pixel_of.size());
            sys.pixel_of.push_back(static_cast<int>(p));
        }
    }
    const std::size_t m = sys.pixel_of.size();
    SparseLaplacian& a = sys.a;
    a.diag.assign(m, 0.0);
    a.row_start.assign(m + 1, 0);
    sys.rhs.assign(m, 0.0);

    static constexpr int dx[] = {-1, 1, 0, 0};
    static constexpr int dy[] = {0, 0, -1, 1};
    for (std::size_t i = 0; i < m; ++i) {
        const int p = sys.pixel_of[i];
        const int px = p % w, py = p / w;
        for (int k = 0; k < 4; ++k) {
            const int qx = px + dx[k], qy = py + dy[k];
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
            const double d2 = detail::feature_distance2(features, ch, static_cast<std::size_t>(p), q);
            const double prior_pq = std::max(prior[static_cast<std::size_t>(p)], prior[q]);
            const double wpq =
                (std::exp(-params.beta * d2) + kWeightFloor) * (1.0 - params.edge_prior_weight * prior_pq);
            a.diag[i] += wpq;
            if (sys.unknown_of[q] >= 0) {
                a.cols.push_back(sys.unknown_of[q]);
                a.weights.push_back(wpq);
            } else if (seeds.positive[q]) {
                sys.rhs[i] += wpq;
            }
        }
        a.row_start[i + 1] = static_cast<int>(a.cols.size());
    }
    return sys;
}

// Aggregation multigrid ---------------------------------------------------------
//
// Neighbouring weights span ~6 orders of magnitude (exp(-beta d^2) against the
// 1e-6 floor), so the system splits into nearly decoupled regions and
// single-level preconditioners stall. Aggregates follow strong couplings
// only, so each coarse unknown stays inside one region.

constexpr double kStrongFraction = 0.25;  // match along weights >= this share of the row max
constexpr std::size_t kDirectSize = 64;   // coarsest level solved by dense Cholesky
constexpr std::size_t kDenseLimit = 2000;
constexpr int kMaxLevels = 40;
constexpr int kCoarseVisits = 2;

// Greedy matching along the strongest coupling. A node whose strong
// neighbours are all taken joins the strongest one's group (up to three
// members) instead of staying alone. Returns the number of groups; `agg`
// maps each node to its group.
std::size_t pairwise_match(const SparseLaplacian& a, std::vector<int>& agg) {
    const std::size_t n = a.size();
    agg.assign(n, -1);
    std::vector<int> group_size;
    for (std::size_t i = 0; i < n; ++i) {
        if (agg[i] >= 0) continue;
        double row_max = 0.0;
        for (int k = a.row_start[i]; k < a.row_start[i + 1]; ++k) row_max = std::max(row_max, a.weights[k]);
        const double strong = kStrongFraction * row_max;
        int free_best = -1, taken_best = -1;
        double free_w = 0.0, taken_w = 0.0;
        for (int k = a.row_start[i]; k < a.row_start[i + 1]; ++k) {
            const int j = a.cols[k];
            const double w = a.weights[k];
            if (w <= 0.0 || w < strong) continue;
            if (agg[j] < 0 && w > free_w) {
                free_best = j;
                free_w = w;
            } else if (agg[j] >= 0 && group_size[agg[j]] < 3 && w > taken_w) {
                taken_best = j;
                taken_w = w;
            }
        }
        if (free_best >= 0) {
            agg[i] = agg[free_best] = static_cast<int>(group_size.size());
            group_size.push_back(2);
        } else if (taken_best >= 0) {
            agg[i] = agg[taken_best];
            ++group_size[agg[i]];
        } else {
            agg[i] = static_cast<int>(group_size.size());
            group_size.push_back(1);
        }
    }
    return group_size.size();
}

// Galerkin product P^T A P for piecewise-constant P.
SparseLaplacian coarsen(const SparseLaplacian& a, const std::vector<int>& agg, std::size_t nc) {
    std::vector<int> member_start(nc + 1, 0), members(a.size());
    for (int g : agg) ++member_start[g + 1];
    for (std::size_t g = 0; g < nc; ++g) member_start[g + 1] += member_start[g];
    std::vector<int> fill(member_start.begin(), member_start.end() - 1);
    for (std::size_t i = 0; i < a.size(); ++i) members[fill[agg[i]]++] = static_cast<int>(i);

    SparseLaplacian c;
    c.diag.assign(nc, 0.0);
    c.row_start.assign(nc + 1, 0);
    std::vector<int> slot(nc, -1);
    for (std::size_t g = 0; g < nc; ++g) {
        const int row_begin = static_cast<int>(c.cols.size());
        for (int mi = member_start[g]; mi < member_start[g + 1]; ++mi) {
            const int i = members[mi];
            c.diag[g] += a.diag[i];
            for (int k = a.row_start[i]; k < a.row_start[i + 1]; ++k) {
                const int h = agg[a.cols[k]];
                if (h == static_cast<int>(g)) {
                    c.diag[g] -= a.weights[k];
                } else if (slot[h] < row_begin) {
                    slot[h] = static_cast<int>(c.cols.size());
                    c.cols.push_back(h);
                    c.weights.push_back(a.weights[k]);
                } else {
                    c.weights[slot[h]] += a.weights[k];
                }
            }
        }
        c.row_start[g + 1] = static_cast<int>(c.cols.size());
    }
    return c;
}

// One symmetric V-cycle (forward Gauss-Seidel before, backward after the
// coarse correction) is a symmetric positive definite preconditioner.
class MultigridPreconditioner {
public:
    explicit MultigridPreconditioner(const SparseLaplacian& fine) : fine_(fine) {
        const SparseLaplacian* current = &fine_;
        while (current->size() > kDirectSize && static_cast<int>(coarse_.size()) < kMaxLevels) {
            std::vector<int> first, second;
            const std::size_t n1 = pairwise_match(*current, first);
            SparseLaplacian mid = coarsen(*current, first, n1);
            const std::size_t n2 = pairwise_match(mid, second);
            if (n2 * 5 > current->size() * 4) break;  // coarsening stalled
            for (int& g : first) g = second[g];
            aggregate_.push_back(std::move(first));
            coarse_.push_back(coarsen(mid, second, n2));
            current = &coarse_.back();
        }
        const std::size_t levels = coarse_.size() + 1;
        x_.resize(levels);
        b_.resize(levels);
        inv_diag_.resize(levels);
        for (std::size_t l = 0; l < levels; ++l) {
            x_[l].resize(level(l).size());
            b_[l].resize(level(l).size());
            for (double d : level(l).diag) inv_diag_[l].push_back(1.0 / d);
        }
        if (current->size() <= kDenseLimit) factor_dense(*current);
    }

    void apply(const std::vector<double>& r, std::vector<double>& z) const {
        b_[0] = r;
        cycle(0);
        z = x_[0];
    }

private:
    const SparseLaplacian& level(std::size_t l) const { return l == 0 ? fine_ : coarse_[l - 1]; }

    // Gauss-Seidel sweep; the inverse diagonal keeps divisions off the dependency chain.
    static void sweep(const SparseLaplacian& a, const std::vector<double>& inv_diag, const std::vector<double>& b,
                      std::vector<double>& x, bool forward) {
        const std::size_t n = a.size();
        const int* rs = a.row_start.data();
        const int* cols = a.cols.data();
        const double* w = a.weights.data();
        double* xp = x.data();
        if (forward) {
            for (std::size_t i = 0; i < n; ++i) {
                double v = b[i];
                for (int k = rs[i]; k < rs[i + 1]; ++k) v += w[k] * xp[cols[k]];
                xp[i] = v * inv_diag[i];
            }
        } else {
            for (std::size_t i = n; i-- > 0;) {
                double v = b[i];
                for (int k = rs[i]; k < rs[i + 1]; ++k) v += w[k] * xp[cols[k]];
                xp[i] = v * inv_diag[i];
            }
        }
    }

    void cycle(std::size_t l) const {
        const SparseLaplacian& a = level(l);
        std::vector<double>& x = x_[l];
        const std::vector<double>& b = b_[l];
        std::fill(x.begin(), x.end(), 0.0);
        if (l == coarse_.size()) {
            if (!cholesky_.empty()) solve_dense(b, x);
            else
                for (int s = 0; s < 8; ++s) sweep(a, inv_diag_[l], b, x, s % 2 == 0);
            return;
        }
        sweep(a, inv_diag_[l], b, x, true);
        // Coarse levels are visited twice (W-cycle); the fine level once.
        const int visits = l == 0 ? 1 : kCoarseVisits;
        for (int v = 0; v < visits; ++v) coarse_correction(l);
        sweep(a, inv_diag_[l], b, x, false);
    }

    void coarse_correction(std::size_t l) const {
        const SparseLaplacian& a = level(l);
        std::vector<double>& x = x_[l];
        const std::vector<double>& b = b_[l];
        std::vector<double>& bc = b_[l + 1];
        std::fill(bc.begin(), bc.end(), 0.0);
        const std::vector<int>& agg = aggregate_[l];
        for (std::size_t i = 0; i < a.size(); ++i) {
            double res = b[i] - a.diag[i] * x[i];
            for (int k = a.row_start[i]; k < a.row_start[i + 1]; ++k) res += a.weights[k] * x[a.cols[k]];
            bc[agg[i]] += res;
        }
        cycle(l + 1);
        const std::vector<double>& xc = x_[l + 1];
        for (std::size_t i = 0; i < a.size(); ++i) x[i] += xc[agg[i]];
    }

    void factor_dense(const SparseLaplacian& a) {
        const std::size_t n = a.size();
        dense_n_ = n;
        cholesky_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            cholesky_[i * n + i] = a.diag[i];
            for (int k = a.row_start[i]; k < a.row_start[i + 1]; ++k) cholesky_[i * n + a.cols[k]] -= a.weights[k];
        }
        for (std::size_t j = 0; j < n; ++j) {
            double d = cholesky_[j * n + j];
            for (std::size_t k = 0; k < j; ++k) d -= cholesky_[j * n + k] * cholesky_[j * n + k];
            d = std::sqrt(std::max(d, a.diag[j] * 1e-14));
            cholesky_[j * n + j] = d;
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = cholesky_[i * n + j];
                for (std::size_t k = 0; k < j; ++k) s -= cholesky_[i * n + k] * cholesky_[j * n + k];
                cholesky_[i * n + j] = s / d;
            }
        }
    }

    void solve_dense(const std::vector<double>& b, std::vector<double>& x) const {
        const std::size_t n = dense_n_;
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= cholesky_[i * n + k] * x[k];
            x[i] = s / cholesky_[i * n + i];
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t k = i + 1; k < n; ++k) s -= cholesky_[k * n + i] * x[k];
            x[i] = s / cholesky_[i * n + i];
        }
    }

    const SparseLaplacian& fine_;
    std::vector<SparseLaplacian> coarse_;
    std::vector<std::vector<int>> aggregate_;  // level l node -> level l+1 node
    std::vector<double> cholesky_;             // row-major lower factor of the coarsest level
    std::size_t dense_n_ = 0;
    std::vector<std::vector<double>> inv_diag_;
    mutable std::vector<std::vector<double>> x_, b_;
};

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Preconditioned conjugate gradient. Stops when the preconditioned residual
// max|M^-1 r| -- an estimate of the potential error, in potential units --
// is within tolerance, confirmed against the true residual b - Ax. A plain
// relative residual can stay small while weakly coupled pixels are far off.
std::vector<double> solve_cg(const LaplacianSystem& sys, double tolerance, int max_iterations) {
    const SparseLaplacian& a = sys.a;
    const std::size_t m = a.size();
    std::vector<double> x(m, 0.0), r = sys.rhs, z(m), p(m), ap(m);
    if (m == 0 || max_abs(sys.rhs) == 0.0) return x;

    const MultigridPreconditioner precond(a);
    precond.apply(r, z);
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < m; ++i) rz += r[i] * z[i];

    double estimate = max_abs(z);
    for (int it = 0; it < max_iterations; ++it) {
        a.multiply(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < m; ++i) pap += p[i] * ap[i];
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < m; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond.apply(r, z);
        estimate = max_abs(z);
        bool restart = false;
        if (estimate <= tolerance) {
            // Recurrence drift: recompute from the true residual, restart if needed.
            a.multiply(x, ap);
            for (std::size_t i = 0; i < m; ++i) r[i] = sys.rhs[i] - ap[i];
            precond.apply(r, z);
            estimate = max_abs(z);
            if (estimate <= tolerance) return x;
            restart = true;
        }
        double rz_next = 0.0;
        for (std::size_t i = 0; i < m; ++i) rz_next += r[i] * z[i];
        const double beta = restart ? 0.0 : rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
    }
    std::ostringstream msg;
    msg << "random walker: conjugate gradient did not converge in " << max_iterations
        << " iterations (preconditioned residual " << estimate << ")";
    throw Error(ErrorCode::SolverNonConvergence, msg.str());
}

}  // namespace

EngineOutput random_walker_segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                                   const EdgeMap& prior) {
    const SeedMasks seeds = detail::prepare_engine_inputs(params, image, clicks, prior);
    const LaplacianSystem sys = build_system(params, image, seeds, prior);
    const std::vector<double> x = solve_cg(sys, params.solver_tolerance, params.solver_max_iterations);

    const std::size_t n = image.pixel_count();
    std::vector<double> potential(n);
    for (std::size_t p = 0; p < n; ++p) {
        const int u = sys.unknown_of[p];
        if (u >= 0) potential[p] = std::clamp(x[static_cast<std::size_t>(u)], 0.0, 1.0);
        else potential[p] = seeds.positive[p] ? 1.0 : 0.0;
    }
    LabelMask mask(image.width(), image.height());
    for (std::size_t p = 0; p < n; ++p) mask[p] = potential[p] >= 0.5 ? 1 : 0;
    return detail::make_output(std::move(mask), std::move(potential));
}

}  // namespace clickmask
