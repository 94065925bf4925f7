#ifndef QPSIM_FIT_HPP
#define QPSIM_FIT_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpsim {

// Dense Gaussian elimination with partial pivoting. Systems here are tiny
// (<= 7 unknowns), so no factorization reuse.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const size_t n = b.size();
    if (a.size() != n * n) throw std::invalid_argument("solve_linear: shape mismatch");
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        double best = std::fabs(a[col * n + col]);
        for (size_t r = col + 1; r < n; ++r) {
            double v = std::fabs(a[r * n + col]);
            if (v > best) { best = v; piv = r; }
        }
        if (best == 0.0) throw std::runtime_error("solve_linear: singular matrix");
        if (piv != col) {
            for (size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
        x[ri] = s / a[ri * n + ri];
    }
    return x;
}

// Inverse via Gauss-Jordan, same pivoting.
inline std::vector<double> invert_matrix(std::vector<double> a, size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        double best = std::fabs(a[col * n + col]);
        for (size_t r = col + 1; r < n; ++r) {
            double v = std::fabs(a[r * n + col]);
            if (v > best) { best = v; piv = r; }
        }
        if (best == 0.0) throw std::runtime_error("invert_matrix: singular matrix");
        if (piv != col) {
            for (size_t c = 0; c < n; ++c) {
                std::swap(a[piv * n + c], a[col * n + c]);
                std::swap(inv[piv * n + c], inv[col * n + c]);
            }
        }
        double d = a[col * n + col];
        for (size_t c = 0; c < n; ++c) { a[col * n + c] /= d; inv[col * n + c] /= d; }
        for (size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r * n + col];
            if (f == 0.0) continue;
            for (size_t c = 0; c < n; ++c) {
                a[r * n + c] -= f * a[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    return inv;
}

using ResidualFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct CurveFit {
    std::vector<double> params;
    std::vector<double> sigma;     // one standard error per parameter
    double residual_norm = 0.0;    // sqrt(sum of squared residuals)
    int iterations = 0;
    bool converged = false;

    double ci95_halfwidth(size_t i) const { return 1.959963984540054 * sigma.at(i); }
};

struct LmOptions {
    int max_iterations = 200;
    double tol_cost = 1e-14;       // relative cost decrease
    double tol_step = 1e-12;       // relative parameter step
    double lambda0 = 1e-3;
};

// Levenberg-Marquardt with central-difference Jacobian.
inline CurveFit levenberg_marquardt(const ResidualFn& residual,
                                    std::vector<double> x0,
                                    const LmOptions& opt = LmOptions()) {
    const size_t p = x0.size();
    std::vector<double> r = residual(x0);
    const size_t m = r.size();
    if (m < p) throw std::invalid_argument("levenberg_marquardt: fewer residuals than parameters");

    auto cost_of = [](const std::vector<double>& v) {
        double c = 0.0;
        for (double e : v) c += e * e;
        return 0.5 * c;
    };

    auto jacobian = [&](const std::vector<double>& x) {
        std::vector<double> jac(m * p);
        for (size_t j = 0; j < p; ++j) {
            double h = 1e-7 * std::max(1.0, std::fabs(x[j]));
            std::vector<double> xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            std::vector<double> rp = residual(xp), rm = residual(xm);
            for (size_t i = 0; i < m; ++i) jac[i * p + j] = (rp[i] - rm[i]) / (2.0 * h);
        }
        return jac;
    };

    double cost = cost_of(r);
    double lambda = opt.lambda0;
    CurveFit out;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        std::vector<double> jac = jacobian(x0);
        // normal equations
        std::vector<double> jtj(p * p, 0.0), jtr(p, 0.0);
        for (size_t i = 0; i < m; ++i) {
            for (size_t a = 0; a < p; ++a) {
                jtr[a] += jac[i * p + a] * r[i];
                for (size_t b = a; b < p; ++b) jtj[a * p + b] += jac[i * p + a] * jac[i * p + b];
            }
        }
        for (size_t a = 0; a < p; ++a)
            for (size_t b = 0; b < a; ++b) jtj[a * p + b] = jtj[b * p + a];

        bool stepped = false;
        for (int tries = 0; tries < 30 && !stepped; ++tries) {
            std::vector<double> aug = jtj;
            for (size_t a = 0; a < p; ++a) {
                double d = jtj[a * p + a];
                aug[a * p + a] += lambda * (d > 0.0 ? d : 1.0);
            }
            std::vector<double> rhs(p);
            for (size_t a = 0; a < p; ++a) rhs[a] = -jtr[a];
            std::vector<double> step;
            try {
                step = solve_linear(aug, rhs);
            } catch (const std::runtime_error&) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> xt = x0;
            for (size_t a = 0; a < p; ++a) xt[a] += step[a];
            std::vector<double> rt = residual(xt);
            double ct = cost_of(rt);
            if (std::isfinite(ct) && ct <= cost) {
                double step_norm = 0.0, x_norm = 0.0;
                for (size_t a = 0; a < p; ++a) {
                    step_norm += step[a] * step[a];
                    x_norm += x0[a] * x0[a];
                }
                bool small_step = step_norm <= opt.tol_step * opt.tol_step * std::max(1.0, x_norm);
                bool small_decrease = (cost - ct) <= opt.tol_cost * std::max(cost, 1e-300);
                x0 = xt;
                r = rt;
                cost = ct;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (small_step || small_decrease) {
                    out.converged = true;
                }
            } else {
                lambda *= 10.0;
            }
        }
        if (!stepped) {
            // no direction improves the cost: stationary within precision
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }

    out.params = x0;
    out.iterations = it + 1;
    out.residual_norm = std::sqrt(2.0 * cost);
    // covariance = s^2 (J^T J)^-1 with s^2 = 2 cost / (m - p)
    out.sigma.assign(p, 0.0);
    try {
        std::vector<double> jac = jacobian(x0);
        std::vector<double> jtj(p * p, 0.0);
        for (size_t i = 0; i < m; ++i)
            for (size_t a = 0; a < p; ++a)
                for (size_t b = 0; b < p; ++b) jtj[a * p + b] += jac[i * p + a] * jac[i * p + b];
        std::vector<double> cov = invert_matrix(jtj, p);
        double s2 = (m > p) ? 2.0 * cost / static_cast<double>(m - p) : 0.0;
        for (size_t a = 0; a < p; ++a) out.sigma[a] = std::sqrt(std::max(0.0, cov[a * p + a] * s2));
    } catch (const std::runtime_error&) {
        // leave sigmas at zero when the information matrix is singular
    }
    return out;
}

} // namespace qpsim

#endif
