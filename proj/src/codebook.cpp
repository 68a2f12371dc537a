#include "dovf/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "binary_io.hpp"
#include "dovf/errors.hpp"
#include "dovf/random.hpp"

namespace dovf {

// ---------------------------------------------------------------- PCA

PcaModel fit_pca(const Matrix& data, std::size_t p, bool whiten) {
    const auto m = static_cast<std::size_t>(data.rows());
    const auto d = static_cast<std::size_t>(data.cols());
    if (m < 2) throw ArgumentError("PCA needs at least 2 samples, got " + std::to_string(m));
    if (p < 1 || p > std::min(m - 1, d)) {
        throw ArgumentError("PCA target dimension " + std::to_string(p) + " outside [1, " +
                            std::to_string(std::min(m - 1, d)) + "]");
    }
    PcaModel model;
    model.whiten = whiten;
    model.mean = data.colwise().mean().transpose();
    const Matrix centred = data.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(m - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("PCA eigendecomposition failed");

    model.basis.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
    model.explained_variance.resize(static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < p; ++r) {
        // eigenvalues come back ascending
        const auto col = static_cast<Eigen::Index>(d - 1 - r);
        Vector dir = eig.eigenvectors().col(col);
        Eigen::Index big = 0;
        dir.cwiseAbs().maxCoeff(&big);
        if (dir[big] < 0) dir = -dir;
        model.basis.row(static_cast<Eigen::Index>(r)) = dir.transpose();
        model.explained_variance[static_cast<Eigen::Index>(r)] = std::max(0.0, eig.eigenvalues()[col]);
    }
    return model;
}

Vector pca_project(const PcaModel& model, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
        throw ArgumentError("PCA input has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(model.input_dim()));
    }
    Vector y = model.basis * (x - model.mean);
    if (model.whiten) y.array() /= (model.explained_variance.array() + 1e-12).sqrt();
    return y;
}

Matrix pca_project_rows(const PcaModel& model, const Matrix& rows) {
    if (static_cast<std::size_t>(rows.cols()) != model.input_dim()) {
        throw ArgumentError("PCA input has dimension " + std::to_string(rows.cols()) + ", model expects " +
                            std::to_string(model.input_dim()));
    }
    Matrix y = (rows.rowwise() - model.mean.transpose()) * model.basis.transpose();
    if (model.whiten) {
        const Vector scale = (model.explained_variance.array() + 1e-12).sqrt().inverse();
        y = y * scale.asDiagonal();
    }
    return y;
}

// ---------------------------------------------------------------- k-means

std::size_t nearest_centroid(const Matrix& centroids, const Eigen::Ref<const Vector>& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double dist = (centroids.row(c).transpose() - x).squaredNorm();
        if (dist < best_d) {
            best_d = dist;
            best = static_cast<std::size_t>(c);
        }
    }
    return best;
}

namespace {

std::vector<Eigen::Index> kmeanspp_seeds(const Matrix& data, std::size_t k, Rng& rng) {
    const auto m = data.rows();
    std::vector<Eigen::Index> chosen;
    chosen.push_back(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(m))));
    std::vector<double> mindist(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const auto last = chosen.back();
        double total = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            auto& md = mindist[static_cast<std::size_t>(i)];
            md = std::min(md, (data.row(i) - data.row(last)).squaredNorm());
            total += md;
        }
        Eigen::Index pick = 0;
        if (total <= 0) {
            // only duplicates of existing seeds remain
            pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(m)));
        } else {
            const double target = uniform01(rng) * total;
            double acc = 0;
            pick = -1;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double md = mindist[static_cast<std::size_t>(i)];
                if (md <= 0) continue;
                acc += md;
                pick = i;
                if (acc > target) break;
            }
        }
        chosen.push_back(pick);
    }
    return chosen;
}

struct Assignment {
    std::vector<std::size_t> cluster;
    std::vector<double> dist;  // squared distance to the assigned centroid
    double inertia = 0;
};

Assignment assign(const Matrix& data, const Matrix& centroids) {
    const auto m = static_cast<std::size_t>(data.rows());
    Assignment a;
    a.cluster.resize(m);
    a.dist.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = data.row(static_cast<Eigen::Index>(i)).transpose();
        const auto c = nearest_centroid(centroids, row);
        a.cluster[i] = c;
        a.dist[i] = (centroids.row(static_cast<Eigen::Index>(c)).transpose() - row).squaredNorm();
        a.inertia += a.dist[i];
    }
    return a;
}

}  // namespace

KmeansModel fit_kmeans(const Matrix& data, std::size_t k, std::uint64_t seed, const KmeansOptions& options) {
    const auto m = static_cast<std::size_t>(data.rows());
    if (k < 1) throw ArgumentError("k-means needs k >= 1");
    if (m < k) {
        throw ArgumentError("k-means with k=" + std::to_string(k) + " needs at least k samples, got " +
                            std::to_string(m));
    }
    Rng rng(seed);
    const auto seeds = kmeanspp_seeds(data, k, rng);
    KmeansModel model;
    model.centroids.resize(static_cast<Eigen::Index>(k), data.cols());
    for (std::size_t c = 0; c < k; ++c) model.centroids.row(static_cast<Eigen::Index>(c)) = data.row(seeds[c]);

    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        auto a = assign(data, model.centroids);
        model.inertia_history.push_back(a.inertia);
        model.iterations = iter + 1;

        Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), data.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < m; ++i) {
            sums.row(static_cast<Eigen::Index>(a.cluster[i])) += data.row(static_cast<Eigen::Index>(i));
            ++counts[a.cluster[i]];
        }
        Matrix next = model.centroids;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) next.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
        }
        // empty-cluster repair: take the point farthest from its (updated) centroid
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_d = -1;
            for (std::size_t i = 0; i < m; ++i) {
                const double dist = (data.row(static_cast<Eigen::Index>(i)) -
                                     next.row(static_cast<Eigen::Index>(a.cluster[i])))
                                        .squaredNorm();
                if (dist > far_d) {
                    far_d = dist;
                    far = i;
                }
            }
            next.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(far));
            a.cluster[far] = c;
            counts[c] = 1;
        }
        const double moved = (next - model.centroids).rowwise().norm().maxCoeff();
        model.centroids = std::move(next);
        if (moved < options.tolerance) break;
    }
    const auto final_assignment = assign(data, model.centroids);
    model.inertia = final_assignment.inertia;
    model.inertia_history.push_back(model.inertia);
    return model;
}

// ---------------------------------------------------------------- GMM

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Vector& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

void require_dim(const GmmModel& model, Eigen::Index dim) {
    if (static_cast<std::size_t>(dim) != model.dim()) {
        throw ArgumentError("GMM input has dimension " + std::to_string(dim) + ", model expects " +
                            std::to_string(model.dim()));
    }
}

}  // namespace

Vector floored_weights(const Vector& counts, double floor) {
    const auto k = counts.size();
    if (floor * static_cast<double>(k) >= 1.0 || counts.sum() <= 0) return Vector::Constant(k, 1.0 / static_cast<double>(k));
    std::vector<bool> floored(static_cast<std::size_t>(k), false);
    Vector w(k);
    while (true) {
        double free_mass = 1.0;
        double free_count = 0;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (floored[static_cast<std::size_t>(c)]) {
                free_mass -= floor;
            } else {
                free_count += counts[c];
            }
        }
        bool changed = false;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (floored[static_cast<std::size_t>(c)]) {
                w[c] = floor;
                continue;
            }
            w[c] = free_count > 0 ? counts[c] * free_mass / free_count : floor;
            if (w[c] < floor) {
                floored[static_cast<std::size_t>(c)] = true;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return w / w.sum();
}

Vector gmm_log_joint(const GmmModel& model, const Eigen::Ref<const Vector>& x) {
    require_dim(model, x.size());
    const auto k = static_cast<Eigen::Index>(model.k());
    Vector out(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto var = model.variances.row(c).transpose().array();
        const auto diff = x.array() - model.means.row(c).transpose().array();
        out[c] = std::log(model.weights[c]) -
                 0.5 * (static_cast<double>(x.size()) * kLog2Pi + var.log().sum() + (diff.square() / var).sum());
    }
    return out;
}

Vector gmm_posteriors(const GmmModel& model, const Eigen::Ref<const Vector>& x) {
    const Vector lj = gmm_log_joint(model, x);
    const double lse = log_sum_exp(lj);
    if (std::isfinite(lse)) {
        Vector g = (lj.array() - lse).exp();
        return g / g.sum();
    }
    // Squared distances overflowed: the limit puts all mass on the nearest
    // component(s) in Mahalanobis distance.
    const auto k = static_cast<Eigen::Index>(model.k());
    Vector dist(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const Vector z = ((x.array() - model.means.row(c).transpose().array()) /
                          model.variances.row(c).transpose().array().sqrt())
                             .matrix();
        dist[c] = z.stableNorm();
    }
    const double best = dist.minCoeff();
    Vector g = (dist.array() == best).cast<double>().matrix();
    return g / g.sum();
}

double gmm_log_likelihood(const GmmModel& model, const Matrix& data) {
    require_dim(model, data.cols());
    double total = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) total += log_sum_exp(gmm_log_joint(model, data.row(i).transpose()));
    return total / static_cast<double>(data.rows());
}

GmmModel fit_gmm(const Matrix& data, std::size_t k, std::uint64_t seed, const GmmOptions& options) {
    const auto m = data.rows();
    const auto p = data.cols();
    if (k < 1) throw ArgumentError("GMM needs k >= 1");
    if (static_cast<std::size_t>(m) < k) {
        throw ArgumentError("GMM with k=" + std::to_string(k) + " needs at least k samples, got " + std::to_string(m));
    }
    const auto ki = static_cast<Eigen::Index>(k);
    const auto km = fit_kmeans(data, k, seed, options.kmeans);

    GmmModel model;
    model.means = km.centroids;
    model.variances = Matrix::Zero(ki, p);
    Vector counts = Vector::Zero(ki);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto c = static_cast<Eigen::Index>(nearest_centroid(km.centroids, data.row(i).transpose()));
        counts[c] += 1;
        model.variances.row(c) += (data.row(i) - model.means.row(c)).array().square().matrix();
    }
    const Vector global_var = (data.rowwise() - data.colwise().mean()).array().square().colwise().mean().transpose();
    for (Eigen::Index c = 0; c < ki; ++c) {
        if (counts[c] > 0) {
            model.variances.row(c) /= counts[c];
        } else {
            model.variances.row(c) = global_var.transpose();
        }
    }
    model.variances = model.variances.cwiseMax(options.variance_floor);
    model.weights = (counts / static_cast<double>(m)).cwiseMax(options.weight_floor);
    model.weights /= model.weights.sum();

    Matrix resp(m, ki);
    for (std::size_t iter = 0;; ++iter) {
        // E-step
        double total = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const Vector lj = gmm_log_joint(model, data.row(i).transpose());
            const double lse = log_sum_exp(lj);
            total += lse;
            resp.row(i) = (lj.array() - lse).exp().transpose();
        }
        const double ll = total / static_cast<double>(m);
        model.log_likelihood = ll;
        model.log_likelihood_history.push_back(ll);
        if (iter > 0) {
            const double prev = model.log_likelihood_history[iter - 1];
            if (ll - prev < options.tolerance * std::abs(prev)) break;
        }
        if (iter == options.max_iterations) break;
        model.iterations = iter + 1;

        // M-step
        const Vector nk = resp.colwise().sum().transpose();
        for (Eigen::Index c = 0; c < ki; ++c) {
            if (nk[c] <= 0) continue;  // any mean/variance is optimal for a component with no mass
            const Vector mu = (resp.col(c).transpose() * data).transpose() / nk[c];
            Vector var = Vector::Zero(p);
            for (Eigen::Index i = 0; i < m; ++i) {
                var += resp(i, c) * (data.row(i).transpose() - mu).array().square().matrix();
            }
            model.means.row(c) = mu.transpose();
            model.variances.row(c) = (var / nk[c]).cwiseMax(options.variance_floor).transpose();
        }
        model.weights = floored_weights(nk, options.weight_floor);
    }
    return model;
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr std::string_view kModelMagic = "DOVM";
constexpr std::uint8_t kModelVersion = 1;
enum class ModelTag : std::uint8_t { pca = 1, kmeans = 2, gmm = 3 };

detail::ByteWriter model_header(ModelTag tag) {
    detail::ByteWriter w;
    w.bytes(kModelMagic);
    w.u8(kModelVersion);
    w.u8(static_cast<std::uint8_t>(tag));
    return w;
}

template <typename Derived>
void put(detail::ByteWriter& w, const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
}

template <typename Mat>
void get(detail::ByteReader& r, Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const float v = r.f32();
            if (!std::isfinite(v)) r.fail("non-finite model value");
            m(i, j) = v;
        }
}

detail::ByteReader open_model(const std::filesystem::path& path, ModelTag expected) {
    detail::ByteReader r(detail::read_file(path), "model file " + path.string());
    r.expect_magic(kModelMagic);
    if (const auto v = r.u8(); v != kModelVersion) r.fail("unsupported version " + std::to_string(v));
    if (const auto t = r.u8(); t != static_cast<std::uint8_t>(expected)) {
        r.fail("model type tag " + std::to_string(t) + ", expected " + std::to_string(static_cast<int>(expected)));
    }
    return r;
}

std::pair<Eigen::Index, Eigen::Index> dims(detail::ByteReader& r) {
    const auto a = r.u32();
    const auto b = r.u32();
    if (a == 0 || b == 0) r.fail("zero model dimension");
    return {a, b};
}

}  // namespace

void write_model(const PcaModel& model, const std::filesystem::path& path) {
    auto w = model_header(ModelTag::pca);
    w.u32(static_cast<std::uint32_t>(model.input_dim()));
    w.u32(static_cast<std::uint32_t>(model.output_dim()));
    w.u8(model.whiten ? 1 : 0);
    put(w, model.mean.transpose());
    put(w, model.explained_variance.transpose());
    put(w, model.basis);
    detail::write_file(path, w.buffer());
}

void write_model(const KmeansModel& model, const std::filesystem::path& path) {
    auto w = model_header(ModelTag::kmeans);
    w.u32(static_cast<std::uint32_t>(model.k()));
    w.u32(static_cast<std::uint32_t>(model.dim()));
    w.f32(static_cast<float>(model.inertia));
    put(w, model.centroids);
    detail::write_file(path, w.buffer());
}

void write_model(const GmmModel& model, const std::filesystem::path& path) {
    auto w = model_header(ModelTag::gmm);
    w.u32(static_cast<std::uint32_t>(model.k()));
    w.u32(static_cast<std::uint32_t>(model.dim()));
    w.f32(static_cast<float>(model.log_likelihood));
    put(w, model.weights.transpose());
    put(w, model.means);
    put(w, model.variances);
    detail::write_file(path, w.buffer());
}

PcaModel load_pca_model(const std::filesystem::path& path) {
    auto r = open_model(path, ModelTag::pca);
    const auto [d, p] = dims(r);
    if (p > d) r.fail("PCA output dimension exceeds input dimension");
    PcaModel model;
    model.whiten = r.u8() != 0;
    model.mean.resize(d);
    model.explained_variance.resize(p);
    model.basis.resize(p, d);
    Matrix row(1, d);
    get(r, row);
    model.mean = row.row(0).transpose();
    Matrix ev(1, p);
    get(r, ev);
    model.explained_variance = ev.row(0).transpose();
    get(r, model.basis);
    r.expect_end();
    return model;
}

KmeansModel load_kmeans_model(const std::filesystem::path& path) {
    auto r = open_model(path, ModelTag::kmeans);
    const auto [k, p] = dims(r);
    KmeansModel model;
    model.inertia = r.f32();
    model.centroids.resize(k, p);
    get(r, model.centroids);
    r.expect_end();
    return model;
}

GmmModel load_gmm_model(const std::filesystem::path& path) {
    auto r = open_model(path, ModelTag::gmm);
    const auto [k, p] = dims(r);
    GmmModel model;
    model.log_likelihood = r.f32();
    Matrix w(1, k);
    get(r, w);
    model.weights = w.row(0).transpose();
    if ((model.weights.array() <= 0).any()) r.fail("non-positive mixture weight");
    model.weights /= model.weights.sum();
    model.means.resize(k, p);
    model.variances.resize(k, p);
    get(r, model.means);
    get(r, model.variances);
    r.expect_end();
    // float32 storage can round the floor itself just below it
    model.variances = model.variances.cwiseMax(kVarianceFloor);
    return model;
}

}  // namespace dovf
