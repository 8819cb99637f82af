#pragma once

// Standalone validation harness for the JSD estimator: correlated bivariate
// Gaussians where both the true mutual information and the Jensen-Shannon
// divergence are computable without a neural estimator. The quadrature result
// is the reference the trained estimator is checked against.

#include <cmath>
#include <stdexcept>

#include "mi.hpp"
#include "optim.hpp"

namespace ifm {

struct GaussianJsdReference {
    double jsd_times_two = 0.0;  // 2 * JSD(P || Q), the standard-form supremum
    double true_mi = 0.0;        // -0.5 * ln(1 - rho^2)
};

// Deterministic 2-D trapezoidal quadrature on [-8, 8]^2 with a 2001^2 grid.
// P is the standard bivariate normal with correlation rho, Q the product of
// its marginals.
inline GaussianJsdReference gaussian_reference_jsd(double rho) {
    if (!(std::fabs(rho) < 1.0)) throw DegenerateRho("|rho| must be < 1");
    const int n = 2001;
    const double lo = -8.0, hi = 8.0;
    const double h = (hi - lo) / (n - 1);
    const double two_pi = 6.283185307179586476925286766559;
    const double one_m_r2 = 1.0 - rho * rho;
    const double cp = 1.0 / (two_pi * std::sqrt(one_m_r2));
    const double cq = 1.0 / two_pi;

    double acc = 0.0;
    for (int ix = 0; ix < n; ++ix) {
        const double x = lo + ix * h;
        const double wx = (ix == 0 || ix == n - 1) ? 0.5 : 1.0;
        double row = 0.0;
        for (int iz = 0; iz < n; ++iz) {
            const double z = lo + iz * h;
            const double wz = (iz == 0 || iz == n - 1) ? 0.5 : 1.0;
            const double p = cp * std::exp(-(x * x - 2.0 * rho * x * z + z * z) / (2.0 * one_m_r2));
            const double q = cq * std::exp(-(x * x + z * z) / 2.0);
            const double m = 0.5 * (p + q);
            double t = 0.0;
            if (p > 0.0) t += 0.5 * p * std::log(p / m);
            if (q > 0.0) t += 0.5 * q * std::log(q / m);
            row += wz * t;
        }
        acc += wx * row;
    }
    GaussianJsdReference ref;
    ref.jsd_times_two = 2.0 * acc * h * h;
    ref.true_mi = -0.5 * std::log(one_m_r2);
    return ref;
}

struct GaussianEstimateOptions {
    int64_t batch = 512;       // joint and marginal rows per step, each
    double lr = 0.01;
    double momentum = 0.9;
};

// Trains a fresh width-2 discriminator on sampled Gaussian pairs by ascending
// the standard-form objective, then measures the objective over the full
// sample pool. Deterministic given the seed.
template <typename T = double>
MIEstimate estimate_mi_gaussian(double rho, int64_t n_samples, int64_t train_steps, uint64_t seed,
                                const GaussianEstimateOptions& opt = {}) {
    if (n_samples < 1000) throw std::invalid_argument("need at least 1000 samples");
    if (!(std::fabs(rho) < 1.0)) throw DegenerateRho("|rho| must be < 1");

    Rng sample_rng(mix_seed(seed, 0xA1));
    std::vector<T> xs(static_cast<size_t>(n_samples)), zs(static_cast<size_t>(n_samples));
    const double c = std::sqrt(1.0 - rho * rho);
    for (int64_t i = 0; i < n_samples; ++i) {
        double x = sample_rng.normal();
        double z = rho * x + c * sample_rng.normal();
        xs[static_cast<size_t>(i)] = static_cast<T>(x);
        zs[static_cast<size_t>(i)] = static_cast<T>(z);
    }

    Discriminator<T> D;
    D.init(DiscriminatorConfig{2, {256, 128, 64}, 0.2}, mix_seed(seed, 0xB2));
    auto params = D.params("d");
    SgdMomentum<T> sgd(static_cast<T>(opt.lr), static_cast<T>(opt.momentum));

    Rng batch_rng(mix_seed(seed, 0xC3));
    PairBatch<T> pb;
    pb.left_channels = 1;
    for (int64_t step = 0; step < train_steps; ++step) {
        const int64_t m = opt.batch;
        pb.joint = Tensor<T>(m, 2);
        pb.marginal = Tensor<T>(m, 2);
        for (int64_t k = 0; k < m; ++k) {
            int64_t i = batch_rng.uniform_int(0, n_samples - 1);
            pb.joint.at(k, 0) = xs[static_cast<size_t>(i)];
            pb.joint.at(k, 1) = zs[static_cast<size_t>(i)];
            int64_t a = batch_rng.uniform_int(0, n_samples - 1);
            int64_t b = batch_rng.uniform_int(0, n_samples - 1);
            pb.marginal.at(k, 0) = xs[static_cast<size_t>(a)];
            pb.marginal.at(k, 1) = zs[static_cast<size_t>(b)];
        }
        JsdGrads<T> grads;
        // minimize -F == ascend F
        jsd_objective(D, pb, ObjectiveForm::Standard, Mode::Train, T(-1), &grads);
        sgd.step(params);
    }

    // Final measure over the whole pool, marginal side re-paired by an
    // independent draw.
    pb.joint = Tensor<T>(n_samples, 2);
    pb.marginal = Tensor<T>(n_samples, 2);
    Rng eval_rng(mix_seed(seed, 0xD4));
    for (int64_t k = 0; k < n_samples; ++k) {
        pb.joint.at(k, 0) = xs[static_cast<size_t>(k)];
        pb.joint.at(k, 1) = zs[static_cast<size_t>(k)];
        int64_t a = eval_rng.uniform_int(0, n_samples - 1);
        int64_t b = eval_rng.uniform_int(0, n_samples - 1);
        pb.marginal.at(k, 0) = xs[static_cast<size_t>(a)];
        pb.marginal.at(k, 1) = zs[static_cast<size_t>(b)];
    }
    MIEstimate est = jsd_objective(D, pb, ObjectiveForm::Standard, Mode::Train);
    est.layer_pair_id = -1;
    return est;
}

}  // namespace ifm
