#include "elmer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace elmer::kernels {

double LogStar::value(double z) const {
    if (z >= eps) return std::log(z);
    const double r = z / eps;
    return std::log(eps) - 1.5 + 2.0 * r - 0.5 * r * r;
}

double LogStar::d1(double z) const {
    if (z >= eps) return 1.0 / z;
    return 2.0 / eps - z / (eps * eps);
}

double LogStar::d2(double z) const {
    if (z >= eps) return -1.0 / (z * z);
    return -1.0 / (eps * eps);
}

void set_thread_count(int k) {
#ifdef _OPENMP
    omp_set_num_threads(k < 1 ? 1 : k);
#else
    (void)k;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// Serial reference: one subject at a time, rank-one updates.

namespace serial {

void evaluate(const LinearMoments& m, const Eigen::VectorXd& beta, RowMatrix& g) {
    g.resize(m.n, m.q);
    for (int i = 0; i < m.n; ++i)
        for (int r = 0; r < m.q; ++r) {
            double v = m.offsets(i, r);
            for (int c = 0; c < m.p; ++c) v -= m.slopes(static_cast<Eigen::Index>(i) * m.q + r, c) * beta(c);
            g(i, r) = v;
        }
}

DualTerms dual_terms(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps) {
    const LogStar ls{eps};
    const auto q = g.cols();
    DualTerms t;
    t.gradient = Eigen::VectorXd::Zero(q);
    t.neg_hessian = Eigen::MatrixXd::Zero(q, q);
    t.min_z = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const Eigen::VectorXd gi = g.row(i).transpose();
        const double z = 1.0 + lambda.dot(gi);
        t.min_z = std::min(t.min_z, z);
        t.value += ls.value(z);
        t.gradient += ls.d1(z) * gi;
        t.neg_hessian -= ls.d2(z) * gi * gi.transpose();
    }
    return t;
}

double dual_value(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps) {
    const LogStar ls{eps};
    double v = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) v += ls.value(1.0 + g.row(i).dot(lambda));
    return v;
}

Eigen::MatrixXd gram(const RowMatrix& g) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.cols(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) out += g.row(i).transpose() * g.row(i);
    return out;
}

Eigen::VectorXd envelope_gradient(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.p);
    for (int i = 0; i < m.n; ++i) {
        const double z = 1.0 + g.row(i).dot(lambda);
        out -= m.slope(i).transpose() * lambda / z;
    }
    return out;
}

EnvelopeTerms envelope_terms(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda) {
    EnvelopeTerms t;
    t.grad_beta = Eigen::VectorXd::Zero(m.p);
    t.beta_beta = Eigen::MatrixXd::Zero(m.p, m.p);
    t.lambda_beta = Eigen::MatrixXd::Zero(m.q, m.p);
    t.lambda_lambda = Eigen::MatrixXd::Zero(m.q, m.q);
    for (int i = 0; i < m.n; ++i) {
        const Eigen::VectorXd gi = g.row(i).transpose();
        const double z = 1.0 + gi.dot(lambda);
        const Eigen::VectorXd bl = m.slope(i).transpose() * lambda;
        t.grad_beta -= bl / z;
        t.beta_beta += bl * bl.transpose() / (z * z);
        t.lambda_beta += -m.slope(i) / z + gi * bl.transpose() / (z * z);
        t.lambda_lambda += gi * gi.transpose() / (z * z);
    }
    return t;
}

Eigen::MatrixXd slope_sum(const LinearMoments& m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.q, m.p);
    for (int i = 0; i < m.n; ++i) out += m.slope(i);
    return out;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP: fixed row blocks, partials combined in block order.

namespace parallel {

namespace {

int block_count(Eigen::Index rows) {
    return static_cast<int>((rows + kBlockRows - 1) / kBlockRows);
}

template <class Partial, class BlockFn, class Combine>
Partial blocked_reduce(Eigen::Index rows, Partial init, BlockFn&& block_fn, Combine&& combine) {
    const int nb = block_count(rows);
    std::vector<Partial> partial(static_cast<std::size_t>(nb), init);
#pragma omp parallel for schedule(static) if (nb > 1)
    for (int b = 0; b < nb; ++b) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * kBlockRows;
        const Eigen::Index len = std::min<Eigen::Index>(kBlockRows, rows - start);
        block_fn(start, len, partial[static_cast<std::size_t>(b)]);
    }
    Partial out = init;
    for (const auto& part : partial) combine(out, part);
    return out;
}

}  // namespace

void evaluate(const LinearMoments& m, const Eigen::VectorXd& beta, RowMatrix& g) {
    g.resize(m.n, m.q);
    const int nb = block_count(m.n);
#pragma omp parallel for schedule(static) if (nb > 1)
    for (int b = 0; b < nb; ++b) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * kBlockRows;
        const Eigen::Index len = std::min<Eigen::Index>(kBlockRows, m.n - start);
        const Eigen::VectorXd prod = m.slopes.middleRows(start * m.q, len * m.q) * beta;
        Eigen::Map<const RowMatrix> shaped(prod.data(), len, m.q);
        g.middleRows(start, len) = m.offsets.middleRows(start, len) - shaped;
    }
}

DualTerms dual_terms(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps) {
    const LogStar ls{eps};
    const auto q = g.cols();
    DualTerms init;
    init.gradient = Eigen::VectorXd::Zero(q);
    init.neg_hessian = Eigen::MatrixXd::Zero(q, q);
    init.min_z = std::numeric_limits<double>::infinity();
    return blocked_reduce(
        g.rows(), init,
        [&](Eigen::Index start, Eigen::Index len, DualTerms& out) {
            const auto block = g.middleRows(start, len);
            const Eigen::VectorXd z = Eigen::VectorXd::Ones(len) + block * lambda;
            Eigen::VectorXd d1(len), w(len);
            for (Eigen::Index i = 0; i < len; ++i) {
                out.value += ls.value(z(i));
                out.min_z = std::min(out.min_z, z(i));
                d1(i) = ls.d1(z(i));
                w(i) = -ls.d2(z(i));
            }
            out.gradient.noalias() += block.transpose() * d1;
            out.neg_hessian.noalias() += block.transpose() * w.asDiagonal() * block;
        },
        [](DualTerms& acc, const DualTerms& part) {
            acc.value += part.value;
            acc.gradient += part.gradient;
            acc.neg_hessian += part.neg_hessian;
            acc.min_z = std::min(acc.min_z, part.min_z);
        });
}

double dual_value(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps) {
    const LogStar ls{eps};
    return blocked_reduce(
        g.rows(), 0.0,
        [&](Eigen::Index start, Eigen::Index len, double& out) {
            const Eigen::VectorXd z = Eigen::VectorXd::Ones(len) + g.middleRows(start, len) * lambda;
            for (Eigen::Index i = 0; i < len; ++i) out += ls.value(z(i));
        },
        [](double& acc, double part) { acc += part; });
}

Eigen::MatrixXd gram(const RowMatrix& g) {
    const auto q = g.cols();
    return blocked_reduce(
        g.rows(), Eigen::MatrixXd(Eigen::MatrixXd::Zero(q, q)),
        [&](Eigen::Index start, Eigen::Index len, Eigen::MatrixXd& out) {
            const auto block = g.middleRows(start, len);
            out.noalias() += block.transpose() * block;
        },
        [](Eigen::MatrixXd& acc, const Eigen::MatrixXd& part) { acc += part; });
}

Eigen::VectorXd envelope_gradient(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda) {
    return blocked_reduce(
        m.n, Eigen::VectorXd(Eigen::VectorXd::Zero(m.p)),
        [&](Eigen::Index start, Eigen::Index len, Eigen::VectorXd& out) {
            const Eigen::VectorXd z = Eigen::VectorXd::Ones(len) + g.middleRows(start, len) * lambda;
            for (Eigen::Index i = 0; i < len; ++i)
                out.noalias() -= m.slope(static_cast<int>(start + i)).transpose() * (lambda / z(i));
        },
        [](Eigen::VectorXd& acc, const Eigen::VectorXd& part) { acc += part; });
}

EnvelopeTerms envelope_terms(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda) {
    EnvelopeTerms init;
    init.grad_beta = Eigen::VectorXd::Zero(m.p);
    init.beta_beta = Eigen::MatrixXd::Zero(m.p, m.p);
    init.lambda_beta = Eigen::MatrixXd::Zero(m.q, m.p);
    init.lambda_lambda = Eigen::MatrixXd::Zero(m.q, m.q);
    return blocked_reduce(
        m.n, init,
        [&](Eigen::Index start, Eigen::Index len, EnvelopeTerms& out) {
            const auto block = g.middleRows(start, len);
            const Eigen::VectorXd z = Eigen::VectorXd::Ones(len) + block * lambda;
            const Eigen::VectorXd inv_z2 = z.cwiseInverse().cwiseAbs2();
            out.lambda_lambda.noalias() += block.transpose() * inv_z2.asDiagonal() * block;
            for (Eigen::Index i = 0; i < len; ++i) {
                const auto b = m.slope(static_cast<int>(start + i));
                const Eigen::VectorXd bl = b.transpose() * lambda;
                out.grad_beta -= bl / z(i);
                out.beta_beta.noalias() += bl * bl.transpose() * inv_z2(i);
                out.lambda_beta -= b / z(i);
                out.lambda_beta.noalias() += block.row(i).transpose() * bl.transpose() * inv_z2(i);
            }
        },
        [](EnvelopeTerms& acc, const EnvelopeTerms& part) {
            acc.grad_beta += part.grad_beta;
            acc.beta_beta += part.beta_beta;
            acc.lambda_beta += part.lambda_beta;
            acc.lambda_lambda += part.lambda_lambda;
        });
}

Eigen::MatrixXd slope_sum(const LinearMoments& m) {
    return blocked_reduce(
        m.n, Eigen::MatrixXd(Eigen::MatrixXd::Zero(m.q, m.p)),
        [&](Eigen::Index start, Eigen::Index len, Eigen::MatrixXd& out) {
            for (Eigen::Index i = 0; i < len; ++i) out += m.slope(static_cast<int>(start + i));
        },
        [](Eigen::MatrixXd& acc, const Eigen::MatrixXd& part) { acc += part; });
}

}  // namespace parallel

}  // namespace elmer::kernels
