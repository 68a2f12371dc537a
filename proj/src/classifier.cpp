#include "dovf/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "dovf/errors.hpp"
#include "dovf/random.hpp"

namespace dovf {

KernelKind parse_kernel(const std::string& text) {
    if (text == "linear") return KernelKind::linear;
    if (text == "chi2") return KernelKind::chi2;
    if (text == "chi2_additive") return KernelKind::chi2_additive;
    throw ArgumentError("unknown kernel '" + text + "'");
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::linear: return "linear";
        case KernelKind::chi2: return "chi2";
        case KernelKind::chi2_additive: return "chi2_additive";
    }
    return "?";
}

bool is_chi2(KernelKind kind) { return kind != KernelKind::linear; }

double chi2_distance(std::span<const double> x, std::span<const double> y, double eps) {
    double d = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - y[j];
        d += diff * diff / (x[j] + y[j] + eps);
    }
    return d;
}

namespace {

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double kernel_unchecked(const KernelSpec& spec, const Vector& x, const Vector& y) {
    switch (spec.kind) {
        case KernelKind::linear: return x.dot(y);
        case KernelKind::chi2: return std::exp(-*spec.gamma * chi2_distance(as_span(x), as_span(y), spec.epsilon));
        case KernelKind::chi2_additive: {
            double k = 0;
            for (Eigen::Index j = 0; j < x.size(); ++j) k += 2.0 * x[j] * y[j] / (x[j] + y[j] + spec.epsilon);
            return k;
        }
    }
    return 0;
}

void check_kernel_inputs(const KernelSpec& spec, const Vector& x) {
    if (is_chi2(spec.kind) && (x.array() < 0).any()) {
        throw ArgumentError("chi2 kernel needs non-negative inputs");
    }
}

void check_kernel_spec(const KernelSpec& spec) {
    if (spec.kind == KernelKind::chi2 && (!spec.gamma || !(*spec.gamma > 0))) {
        throw ArgumentError("chi2 kernel needs a resolved gamma > 0");
    }
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y) {
    check_kernel_spec(spec);
    if (x.size() != y.size()) throw ArgumentError("kernel inputs differ in dimension");
    check_kernel_inputs(spec, x);
    check_kernel_inputs(spec, y);
    return kernel_unchecked(spec, x, y);
}

Matrix kernel_matrix(const KernelSpec& spec, const std::vector<Vector>& a, const std::vector<Vector>& b) {
    check_kernel_spec(spec);
    for (const auto* set : {&a, &b}) {
        for (const auto& v : *set) {
            if (!a.empty() && v.size() != a.front().size()) throw ArgumentError("kernel inputs differ in dimension");
            check_kernel_inputs(spec, v);
        }
    }
    Matrix k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    const bool symmetric = &a == &b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = symmetric ? i : 0; j < b.size(); ++j) {
            const double v = kernel_unchecked(spec, a[i], b[j]);
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            if (symmetric) k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    return k;
}

double resolve_gamma(const std::vector<Vector>& train, std::uint64_t seed, double eps) {
    if (train.size() < 2) throw ArgumentError("gamma heuristic needs at least 2 training features");
    constexpr std::size_t kMaxSamples = 1000;
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > kMaxSamples) {
        Rng rng(seed);
        shuffle(idx.begin(), idx.end(), rng);
        idx.resize(kMaxSamples);
        std::sort(idx.begin(), idx.end());
    }
    double total = 0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            total += chi2_distance(as_span(train[idx[a]]), as_span(train[idx[b]]), eps);
            ++pairs;
        }
    }
    const double mean = total / static_cast<double>(pairs);
    return mean > 0 ? 1.0 / mean : 1.0;
}

// ---------------------------------------------------------------- transform

Vector FeatureTransform::apply(const Vector& x) const {
    if (!is_chi2(kernel)) {
        const double n = x.norm();
        return n > 0 ? Vector(x / n) : x;
    }
    // test values below the training minimum would still be negative after the shift
    Vector v = (x.array() + shift).cwiseMax(0.0).matrix();
    const double s = v.sum();
    return s > 0 ? Vector(v / s) : v;
}

std::vector<Vector> FeatureTransform::apply(const std::vector<Vector>& xs) const {
    std::vector<Vector> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(apply(x));
    return out;
}

FeatureTransform fit_feature_transform(const std::vector<Vector>& train, KernelKind kernel) {
    FeatureTransform t;
    t.kernel = kernel;
    if (is_chi2(kernel)) {
        double mn = 0;
        for (const auto& x : train)
            if (x.size() > 0) mn = std::min(mn, x.minCoeff());
        t.shift = -mn;
    }
    return t;
}

std::vector<Vector> feature_transform_for_kernel(const std::vector<Vector>& features, KernelKind kernel) {
    return fit_feature_transform(features, kernel).apply(features);
}

// ---------------------------------------------------------------- SMO

SvmSolution solve_svm_dual(const Matrix& gram, const std::vector<int>& y, const SvmOptions& options) {
    const auto m = y.size();
    if (static_cast<std::size_t>(gram.rows()) != m || static_cast<std::size_t>(gram.cols()) != m) {
        throw ArgumentError("Gram matrix does not match label count");
    }
    const double C = options.C;
    if (!(C > 0)) throw ArgumentError("C must be positive");
    constexpr double kTau = 1e-12;

    auto Q = [&](std::size_t i, std::size_t j) {
        return y[i] * y[j] * gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    std::vector<double> alpha(m, 0.0);
    std::vector<double> G(m, -1.0);
    auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0) || (y[t] == -1 && alpha[t] < C); };

    SvmSolution sol;
    for (std::size_t iter = 0;; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t i = m;
        std::size_t j = m;
        for (std::size_t t = 0; t < m; ++t) {
            const double v = -y[t] * G[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == m || j == m || gmax - gmin < options.tolerance) {
            sol.iterations = iter;
            break;
        }
        if (iter >= options.max_iterations) {
            throw ConvergenceError("SVM solver did not converge within " + std::to_string(options.max_iterations) +
                                   " iterations (KKT gap " + std::to_string(gmax - gmin) + ")");
        }

        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = Q(i, i) + Q(j, j) + 2 * Q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = Q(i, i) + Q(j, j) - 2 * Q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < m; ++t) G[t] += Q(i, t) * di + Q(j, t) * dj;
    }

    // bias from the free variables, or the middle of the feasible interval
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    double rho = 0;
    if (n_free > 0) {
        rho = sum_free / static_cast<double>(n_free);
    } else if (std::isfinite(ub) && std::isfinite(lb)) {
        rho = (ub + lb) / 2;
    } else {
        rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
    }
    sol.alpha = std::move(alpha);
    sol.bias = -rho;
    return sol;
}

double BinarySvm::decision(const KernelSpec& kernel, const Vector& x) const {
    double f = bias;
    for (std::size_t s = 0; s < support_vectors.size(); ++s) f += coefficients[s] * kernel_unchecked(kernel, support_vectors[s], x);
    return f;
}

namespace {

BinarySvm from_solution(const SvmSolution& sol, const std::vector<Vector>& features, const std::vector<int>& y, double C) {
    BinarySvm svm;
    svm.C = C;
    svm.bias = sol.bias;
    svm.iterations = sol.iterations;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (sol.alpha[t] > 0) {
            svm.support_vectors.push_back(features[t]);
            svm.coefficients.push_back(sol.alpha[t] * y[t]);
        }
    }
    return svm;
}

}  // namespace

BinarySvm train_binary(const std::vector<Vector>& features, const std::vector<int>& y, const KernelSpec& kernel,
                       const SvmOptions& options) {
    if (features.size() != y.size()) throw ArgumentError("feature and label counts differ");
    const auto gram = kernel_matrix(kernel, features, features);
    return from_solution(solve_svm_dual(gram, y, options), features, y, options.C);
}

TrainedClassifier train_ovr(const std::vector<Vector>& features, const std::vector<std::size_t>& labels,
                            const std::vector<std::string>& classes, KernelSpec kernel, const SvmOptions& options,
                            std::uint64_t seed) {
    if (features.size() != labels.size()) throw ArgumentError("feature and label counts differ");
    if (features.empty()) throw ArgumentError("no training features");
    const auto dim = features.front().size();
    for (const auto& f : features) {
        if (f.size() != dim) throw ArgumentError("training features differ in dimension");
        if (!f.allFinite()) throw ArgumentError("non-finite training feature");
    }
    std::vector<std::size_t> per_class(classes.size(), 0);
    for (auto l : labels) {
        if (l >= classes.size()) throw ArgumentError("label " + std::to_string(l) + " out of range");
        ++per_class[l];
    }
    if (std::count_if(per_class.begin(), per_class.end(), [](auto n) { return n > 0; }) < 2) {
        throw ArgumentError("one-vs-rest training needs at least two classes present");
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (per_class[c] == 0) throw ArgumentError("class '" + classes[c] + "' has no training examples");
    }

    TrainedClassifier model;
    model.classes = classes;
    model.input_dim = static_cast<std::size_t>(dim);
    model.transform = fit_feature_transform(features, kernel.kind);
    const auto x = model.transform.apply(features);
    if (kernel.kind == KernelKind::chi2 && !kernel.gamma) {
        kernel.gamma = resolve_gamma(x, derive_seed(seed, "gamma"), kernel.epsilon);
    }
    model.kernel = kernel;
    const auto gram = kernel_matrix(kernel, x, x);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<int> y(labels.size());
        for (std::size_t t = 0; t < labels.size(); ++t) y[t] = labels[t] == c ? 1 : -1;
        model.models.push_back(from_solution(solve_svm_dual(gram, y, options), x, y, options.C));
    }
    return model;
}

Matrix decision_values(const TrainedClassifier& model, const std::vector<Vector>& features) {
    Matrix out(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(model.models.size()));
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (static_cast<std::size_t>(features[i].size()) != model.input_dim) {
            throw ArgumentError("feature dimension " + std::to_string(features[i].size()) +
                                " does not match classifier input dimension " + std::to_string(model.input_dim));
        }
        const Vector x = model.transform.apply(features[i]);
        for (std::size_t c = 0; c < model.models.size(); ++c) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = model.models[c].decision(model.kernel, x);
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix& values) {
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const double mx = values.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (values.row(i).array() - mx).exp().matrix();
        out.row(i) = e / e.sum();
    }
    return out;
}

ScoreMatrix predict_scores(const TrainedClassifier& model, const std::vector<Vector>& features,
                           const std::vector<std::string>& video_ids) {
    if (video_ids.size() != features.size()) throw ArgumentError("video id and feature counts differ");
    ScoreMatrix s;
    s.video_ids = video_ids;
    s.columns = model.classes;
    s.scores = softmax_rows(decision_values(model, features));
    return s;
}

// ---------------------------------------------------------------- serialization

namespace {
constexpr std::string_view kClassifierMagic = "DOVC";
constexpr std::uint8_t kClassifierVersion = 1;
}  // namespace

void write_classifier(const TrainedClassifier& model, const std::filesystem::path& path) {
    detail::ByteWriter w;
    w.bytes(kClassifierMagic);
    w.u8(kClassifierVersion);
    w.u8(static_cast<std::uint8_t>(model.kernel.kind));
    w.u8(model.kernel.gamma ? 1 : 0);
    w.f64(model.kernel.gamma.value_or(0.0));
    w.f64(model.kernel.epsilon);
    w.u8(static_cast<std::uint8_t>(model.transform.kernel));
    w.f64(model.transform.shift);
    w.u32(static_cast<std::uint32_t>(model.input_dim));
    w.u32(static_cast<std::uint32_t>(model.classes.size()));
    for (const auto& c : model.classes) w.str(c);
    for (const auto& svm : model.models) {
        w.f64(svm.C);
        w.f64(svm.bias);
        w.u64(svm.iterations);
        w.u32(static_cast<std::uint32_t>(svm.support_vectors.size()));
        for (std::size_t s = 0; s < svm.support_vectors.size(); ++s) {
            w.f64(svm.coefficients[s]);
            for (double v : svm.support_vectors[s]) w.f64(v);
        }
    }
    detail::write_file(path, w.buffer());
}

TrainedClassifier load_classifier(const std::filesystem::path& path) {
    detail::ByteReader r(detail::read_file(path), "classifier file " + path.string());
    r.expect_magic(kClassifierMagic);
    if (const auto v = r.u8(); v != kClassifierVersion) r.fail("unsupported version " + std::to_string(v));
    auto kernel_kind = [&](std::uint8_t k) {
        if (k > static_cast<std::uint8_t>(KernelKind::chi2_additive)) r.fail("bad kernel tag");
        return static_cast<KernelKind>(k);
    };
    TrainedClassifier model;
    model.kernel.kind = kernel_kind(r.u8());
    const bool has_gamma = r.u8() != 0;
    const double gamma = r.f64();
    if (has_gamma) model.kernel.gamma = gamma;
    model.kernel.epsilon = r.f64();
    model.transform.kernel = kernel_kind(r.u8());
    model.transform.shift = r.f64();
    model.input_dim = r.u32();
    const auto classes = r.u32();
    for (std::uint32_t c = 0; c < classes; ++c) model.classes.push_back(r.str());
    for (std::uint32_t c = 0; c < classes; ++c) {
        BinarySvm svm;
        svm.C = r.f64();
        svm.bias = r.f64();
        svm.iterations = r.u64();
        const auto nsv = r.u32();
        for (std::uint32_t s = 0; s < nsv; ++s) {
            svm.coefficients.push_back(r.f64());
            Vector v(static_cast<Eigen::Index>(model.input_dim));
            for (auto& x : v) x = r.f64();
            svm.support_vectors.push_back(std::move(v));
        }
        model.models.push_back(std::move(svm));
    }
    r.expect_end();
    return model;
}

}  // namespace dovf
