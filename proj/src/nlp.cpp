#include "ngmpc/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace ngmpc {
namespace {

double fd_step(double x) { return std::max(1e-6, 1e-7 * std::abs(x)); }

std::string format_point(std::span<const double> x) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "]";
    return os.str();
}

struct LinearRow {
    const std::vector<std::pair<std::size_t, double>>* terms;
    double sign;  // row value = sign * (a . x) - rhs
    double rhs;

    double value(std::span<const double> x) const {
        double acc = 0.0;
        for (const auto& [i, c] : *terms) acc += c * x[i];
        return sign * acc - rhs;
    }
};

// All inequality rows g(x) <= 0: nonlinear rows first, then linear rows.
class Model {
public:
    explicit Model(const NlpProblem& p) : p_(p), n_(p.dimension), m_nl_(p.nonlinear_constraint_count()) {
        for (const LinearConstraint& lc : p.linear_constraints) {
            if (std::isfinite(lc.upper)) linear_.push_back({&lc.terms, 1.0, lc.upper});
            if (std::isfinite(lc.lower)) linear_.push_back({&lc.terms, -1.0, -lc.lower});
        }
    }

    std::size_t rows() const { return m_nl_ + linear_.size(); }
    std::size_t nonlinear_rows() const { return m_nl_; }
    std::size_t evaluations() const { return evaluations_; }

    // Fills objective and all row values; with derivatives also the objective
    // gradient and the dense Jacobian of the nonlinear rows.
    void evaluate(std::span<const double> x, bool with_derivatives, Evaluation& e) {
        ++evaluations_;
        e.constraints.resize(rows());
        if (p_.fused) {
            scratch_.constraints.clear();
            p_.fused(x, with_derivatives, scratch_);
            if (scratch_.constraints.size() != p_.fused_constraint_count) {
                throw std::invalid_argument("fused evaluator returned the wrong number of constraints");
            }
            e.objective = scratch_.objective;
            std::copy(scratch_.constraints.begin(), scratch_.constraints.end(), e.constraints.begin());
            if (with_derivatives) {
                e.gradient = scratch_.gradient;
                e.jacobian.assign(m_nl_ * n_, 0.0);
                std::copy(scratch_.jacobian.begin(), scratch_.jacobian.end(), e.jacobian.begin());
            }
        } else {
            e.objective = p_.objective(x);
            if (with_derivatives) {
                e.gradient.assign(n_, 0.0);
                e.jacobian.assign(m_nl_ * n_, 0.0);
            }
        }
        const std::size_t off = p_.fused_constraint_count;
        for (std::size_t i = 0; i < p_.inequality_constraints.size(); ++i) {
            e.constraints[off + i] = p_.inequality_constraints[i](x);
        }
        for (std::size_t r = 0; r < linear_.size(); ++r) e.constraints[m_nl_ + r] = linear_[r].value(x);
        check_finite(x, e);
        if (with_derivatives && !p_.fused) {
            if (p_.objective_gradient) {
                p_.objective_gradient(x, e.gradient);
            } else {
                central_differences(x, [this](std::span<const double> y) { return p_.objective(y); },
                                    e.gradient.data(), 1);
            }
        }
        if (with_derivatives) {
            for (std::size_t i = 0; i < p_.inequality_constraints.size(); ++i) {
                central_differences(x, p_.inequality_constraints[i], e.jacobian.data() + (off + i) * n_, 1);
            }
        }
    }

    const LinearRow& linear_row(std::size_t r) const { return linear_[r]; }

private:
    template <typename F>
    void central_differences(std::span<const double> x, const F& f, double* out, std::size_t stride) {
        Vector probe(x.begin(), x.end());
        for (std::size_t j = 0; j < n_; ++j) {
            const double h = fd_step(x[j]);
            // Stay inside the box where possible.
            const double up = std::min(x[j] + h, p_.upper[j]);
            const double dn = std::max(x[j] - h, p_.lower[j]);
            probe[j] = up;
            const double fu = f(probe);
            probe[j] = dn;
            const double fd = f(probe);
            probe[j] = x[j];
            evaluations_ += 2;
            if (!std::isfinite(fu) || !std::isfinite(fd)) {
                throw SolverFailure("non-finite value in finite-difference probe near " + format_point(x),
                                    Vector(x.begin(), x.end()));
            }
            out[j * stride] = (up > dn) ? (fu - fd) / (up - dn) : 0.0;
        }
    }

    void check_finite(std::span<const double> x, const Evaluation& e) const {
        bool ok = std::isfinite(e.objective);
        for (double g : e.constraints) ok = ok && std::isfinite(g);
        if (!ok) {
            throw SolverFailure("non-finite objective or constraint at " + format_point(x), Vector(x.begin(), x.end()));
        }
    }

    const NlpProblem& p_;
    std::size_t n_;
    std::size_t m_nl_;
    std::vector<LinearRow> linear_;
    Evaluation scratch_;
    std::size_t evaluations_ = 0;
};

class AugmentedLagrangian {
public:
    AugmentedLagrangian(const NlpProblem& p, const SolverOptions& opts)
        : p_(p), opts_(opts), model_(p), n_(p.dimension), lambda_(model_.rows(), 0.0) {}

    Model& model() { return model_; }
    Vector& lambda() { return lambda_; }
    double& penalty() { return rho_; }

    // phi = f + 1/(2 rho) sum (max(0, lambda + rho g)^2 - lambda^2)
    double value(const Evaluation& e) const {
        double acc = e.objective;
        for (std::size_t i = 0; i < lambda_.size(); ++i) {
            const double t = std::max(0.0, lambda_[i] + rho_ * e.constraints[i]);
            acc += (t * t - lambda_[i] * lambda_[i]) / (2.0 * rho_);
        }
        return acc;
    }

    // Gradient of phi, or of the ordinary Lagrangian when multipliers are given.
    void gradient(const Evaluation& e, Vector& out, const Vector* multipliers = nullptr) const {
        out = e.gradient;
        const std::size_t m_nl = model_.nonlinear_rows();
        for (std::size_t i = 0; i < lambda_.size(); ++i) {
            const double w = multipliers ? (*multipliers)[i] : std::max(0.0, lambda_[i] + rho_ * e.constraints[i]);
            if (w == 0.0) continue;
            if (i < m_nl) {
                const double* row = e.jacobian.data() + i * n_;
                for (std::size_t j = 0; j < n_; ++j) out[j] += w * row[j];
            } else {
                const LinearRow& lr = model_.linear_row(i - m_nl);
                for (const auto& [j, c] : *lr.terms) out[j] += w * lr.sign * c;
            }
        }
    }

    double projected_gradient_norm(std::span<const double> x, const Vector& g) const {
        double r = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            const double t = std::clamp(x[j] - g[j], p_.lower[j], p_.upper[j]);
            r = std::max(r, std::abs(t - x[j]));
        }
        return r;
    }

    // Projected quasi-Newton on phi from x (modified in place). The model
    // Hessian is B + rho * sum a a^T over the rows active in the penalty, with
    // B a damped BFGS estimate of the remaining curvature. Returns iterations.
    int minimize(Vector& x, Evaluation& e, double tolerance) {
        Vector g, g_new, x_trial(n_);
        Eigen::VectorXd d(n_);
        model_.evaluate(x, true, e);
        double phi = value(e);
        gradient(e, g);
        Evaluation trial;
        int flat = 0;
        int it = 0;
        bool fresh_b = !b_ready_;
        if (!b_ready_) {
            b_ = Eigen::MatrixXd::Identity(n_, n_);
            b_ready_ = true;
        }
        for (; it < opts_.max_inner_iterations; ++it) {
            const double pg = projected_gradient_norm(x, g);
            if (pg <= tolerance) break;

            // Variables within pg of a bound with the gradient pushing outward
            // are held; the rest take the reduced Newton step.
            const double band = std::min(pg, 1e-3);
            std::vector<std::size_t> free_idx;
            std::vector<char> held(n_, 0);
            for (std::size_t j = 0; j < n_; ++j) {
                const bool lo = x[j] <= p_.lower[j] + band && g[j] > 0.0;
                const bool hi = x[j] >= p_.upper[j] - band && g[j] < 0.0;
                held[j] = lo || hi;
                if (!held[j]) free_idx.push_back(j);
            }
            const Eigen::MatrixXd h = model_hessian(e);
            for (std::size_t j = 0; j < n_; ++j) {
                d[j] = held[j] ? -g[j] / std::max(h(j, j), 1e-8) : 0.0;
            }
            if (!free_idx.empty()) {
                const std::size_t nf = free_idx.size();
                Eigen::MatrixXd hf(nf, nf);
                Eigen::VectorXd rhs(nf);
                for (std::size_t a = 0; a < nf; ++a) {
                    rhs[a] = -g[free_idx[a]];
                    for (std::size_t b = 0; b < nf; ++b) hf(a, b) = h(free_idx[a], free_idx[b]);
                }
                Eigen::LLT<Eigen::MatrixXd> llt(hf);
                if (llt.info() != Eigen::Success) {
                    const double shift = 1e-8 * std::max(1.0, hf.diagonal().cwiseAbs().maxCoeff());
                    hf.diagonal().array() += shift;
                    llt.compute(hf);
                }
                if (llt.info() == Eigen::Success) {
                    const Eigen::VectorXd df = llt.solve(rhs);
                    for (std::size_t a = 0; a < nf; ++a) d[free_idx[a]] = df[a];
                } else {
                    for (std::size_t j : free_idx) d[j] = -g[j];
                }
            }
            double alpha = 1.0;
            if (fresh_b) {
                const double dmax = d.cwiseAbs().maxCoeff();
                if (dmax > 1.0) alpha = 1.0 / dmax;
            }

            bool accepted = false;
            double phi_trial = phi;
            for (int ls = 0; ls < 40; ++ls) {
                double dec = 0.0;
                for (std::size_t j = 0; j < n_; ++j) {
                    x_trial[j] = std::clamp(x[j] + alpha * d[j], p_.lower[j], p_.upper[j]);
                    dec += g[j] * (x_trial[j] - x[j]);
                }
                if (dec >= 0.0) {
                    alpha *= 0.5;
                    continue;
                }
                model_.evaluate(x_trial, ls == 0, trial);
                phi_trial = value(trial);
                if (phi_trial <= phi + 1e-4 * dec) {
                    if (ls != 0) model_.evaluate(x_trial, true, trial);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                if (!fresh_b) {
                    b_ = Eigen::MatrixXd::Identity(n_, n_);
                    fresh_b = true;
                    continue;
                }
                break;
            }
            gradient(trial, g_new);
            update_b(x, x_trial, g, g_new, trial, fresh_b);
            fresh_b = false;
            flat = (std::abs(phi - phi_trial) <= 1e-15 * std::max(1.0, std::abs(phi))) ? flat + 1 : 0;
            x.swap(x_trial);
            std::swap(e, trial);
            g.swap(g_new);
            phi = phi_trial;
            if (flat >= 3) break;
        }
        return it;
    }

private:
    // Calls fn(row gradient as sparse or dense) for rows active in the penalty.
    template <typename Fn>
    void for_active_rows(const Evaluation& e, Fn&& fn) const {
        const std::size_t m_nl = model_.nonlinear_rows();
        for (std::size_t i = 0; i < lambda_.size(); ++i) {
            if (lambda_[i] + rho_ * e.constraints[i] <= 0.0) continue;
            Eigen::VectorXd a = Eigen::VectorXd::Zero(n_);
            if (i < m_nl) {
                a = Eigen::Map<const Eigen::VectorXd>(e.jacobian.data() + i * n_, n_);
            } else {
                const LinearRow& lr = model_.linear_row(i - m_nl);
                for (const auto& [j, c] : *lr.terms) a[j] += lr.sign * c;
            }
            fn(a);
        }
    }

    Eigen::MatrixXd model_hessian(const Evaluation& e) const {
        Eigen::MatrixXd h = b_;
        for_active_rows(e, [&](const Eigen::VectorXd& a) { h.noalias() += rho_ * a * a.transpose(); });
        return h;
    }

    // Damped BFGS on the part of the gradient change not explained by the
    // penalty Gauss-Newton term at the new point.
    void update_b(const Vector& x0, const Vector& x1, const Vector& g0, const Vector& g1, const Evaluation& e1,
                  bool rescale) {
        Eigen::VectorXd s(n_), y(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            s[j] = x1[j] - x0[j];
            y[j] = g1[j] - g0[j];
        }
        for_active_rows(e1, [&](const Eigen::VectorXd& a) { y.noalias() -= rho_ * a * a.dot(s); });
        const double ss = s.squaredNorm();
        if (ss <= 0.0) return;
        double sy = s.dot(y);
        if (rescale && sy > 0.0) b_ = (y.squaredNorm() / sy) * Eigen::MatrixXd::Identity(n_, n_);
        const Eigen::VectorXd bs = b_ * s;
        const double sbs = s.dot(bs);
        if (!(sbs > 1e-16 * ss)) return;
        Eigen::VectorXd r = y;
        if (sy < 0.2 * sbs) {
            const double theta = 0.8 * sbs / (sbs - sy);
            r = theta * y + (1.0 - theta) * bs;
            sy = s.dot(r);
        }
        if (!(sy > 0.0)) return;
        b_.noalias() += (r * r.transpose()) / sy - (bs * bs.transpose()) / sbs;
    }

    const NlpProblem& p_;
    const SolverOptions& opts_;
    Model model_;
    std::size_t n_;
    Vector lambda_;
    double rho_ = 10.0;
    Eigen::MatrixXd b_;
    bool b_ready_ = false;
};

double row_violation(const Evaluation& e) {
    double v = 0.0;
    for (double g : e.constraints) v = std::max(v, g);
    return v;
}

}  // namespace

void NlpProblem::validate() const {
    if (dimension == 0) throw std::invalid_argument("NLP dimension must be positive");
    if (lower.size() != dimension || upper.size() != dimension) {
        throw std::invalid_argument("variable bounds must match the NLP dimension");
    }
    for (std::size_t i = 0; i < dimension; ++i) {
        if (!(lower[i] <= upper[i])) throw std::invalid_argument("variable bounds must satisfy lower <= upper");
    }
    if (!fused && !objective) throw std::invalid_argument("NLP needs an objective or a fused evaluator");
    if (!fused && fused_constraint_count != 0) throw std::invalid_argument("fused constraint count without evaluator");
    for (const LinearConstraint& lc : linear_constraints) {
        for (const auto& [i, c] : lc.terms) {
            if (i >= dimension) throw std::invalid_argument("linear constraint references a missing variable");
        }
    }
}

double max_violation(const NlpProblem& p, std::span<const double> x) {
    Model model(p);
    Evaluation e;
    model.evaluate(x, false, e);
    double v = row_violation(e);
    for (std::size_t i = 0; i < p.dimension; ++i) {
        v = std::max({v, p.lower[i] - x[i], x[i] - p.upper[i]});
    }
    return v;
}

SolveReport solve(const NlpProblem& p, std::span<const double> start, const SolverOptions& opts) {
    p.validate();
    if (start.size() != p.dimension) throw std::invalid_argument("start point has the wrong dimension");
    const auto t0 = std::chrono::steady_clock::now();

    AugmentedLagrangian al(p, opts);
    al.penalty() = opts.initial_penalty;
    Vector x(p.dimension);
    for (std::size_t i = 0; i < p.dimension; ++i) x[i] = std::clamp(start[i], p.lower[i], p.upper[i]);

    SolveReport report;
    Vector best_x;
    double best_f = kInfinity;
    double best_viol = kInfinity;
    Vector least_x = x;
    double least_viol = kInfinity;
    double least_f = kInfinity;

    Evaluation e;
    Vector grad_l;
    double prev_viol = kInfinity;
    double prev_f = kInfinity;
    Vector prev_x;
    double inner_tol = std::max(opts.kkt_tolerance, 1e-2);
    bool kkt_met = false;
    bool stagnated = false;
    bool infeasible = false;

    for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
        report.iterations += al.minimize(x, e, inner_tol);
        report.outer_iterations = outer + 1;
        const double viol = row_violation(e);
        Vector& lambda = al.lambda();
        Vector lambda_new(lambda.size());
        double compl_res = 0.0;
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            lambda_new[i] = std::max(0.0, lambda[i] + al.penalty() * e.constraints[i]);
            compl_res = std::max(compl_res, std::abs(std::min(-e.constraints[i], lambda_new[i])));
        }
        al.gradient(e, grad_l, &lambda_new);
        const double pg = al.projected_gradient_norm(x, grad_l);
        const double kkt = std::max(pg, compl_res);

        if (viol <= opts.feasibility_tolerance && e.objective < best_f) {
            best_f = e.objective;
            best_x = x;
            best_viol = viol;
            report.kkt_residual = kkt;
        }
        if (viol < least_viol) {
            least_viol = viol;
            least_x = x;
            least_f = e.objective;
        }
        if (viol <= opts.feasibility_tolerance && kkt <= opts.kkt_tolerance) {
            kkt_met = true;
            report.kkt_residual = kkt;
            best_f = e.objective;
            best_x = x;
            best_viol = viol;
            break;
        }
        if (!prev_x.empty() && viol <= opts.feasibility_tolerance) {
            double dx = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) dx = std::max(dx, std::abs(x[i] - prev_x[i]));
            if (dx <= 1e-10 * (1.0 + std::abs(x[0])) &&
                std::abs(e.objective - prev_f) <= 1e-12 * std::max(1.0, std::abs(e.objective)) &&
                inner_tol <= opts.kkt_tolerance) {
                stagnated = true;
                break;
            }
        }
        if (viol > 0.25 * prev_viol && viol > opts.feasibility_tolerance) {
            if (al.penalty() >= opts.max_penalty && viol > 0.99 * prev_viol) {
                infeasible = true;
                break;
            }
            al.penalty() = std::min(al.penalty() * 10.0, opts.max_penalty);
        }
        lambda.swap(lambda_new);
        prev_viol = viol;
        prev_f = e.objective;
        prev_x = x;
        inner_tol = std::max(opts.kkt_tolerance, 0.1 * inner_tol);
    }

    if (!best_x.empty()) {
        report.solution = best_x;
        report.objective_value = best_f;
        report.max_constraint_violation = best_viol;
        report.converged = true;
        report.message = kkt_met ? "kkt tolerance met" : stagnated ? "stagnation" : "iteration cap, feasible";
    } else {
        report.solution = least_x;
        report.objective_value = least_f;
        report.max_constraint_violation = least_viol;
        report.converged = false;
        report.message = infeasible ? "violation stalled at maximum penalty" : "no feasible point found";
    }
    report.evaluations = al.model().evaluations();
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

MultiStartReport multi_start_solve(const NlpProblem& p, const std::vector<Vector>& starts, std::uint64_t seed,
                                   const SolverOptions& opts, std::size_t extra_random_starts) {
    if (starts.empty() && extra_random_starts == 0) throw std::invalid_argument("multi-start needs at least one start");
    p.validate();
    std::vector<Vector> all = starts;
    std::mt19937_64 rng(seed);
    for (std::size_t s = 0; s < extra_random_starts; ++s) {
        Vector x(p.dimension);
        for (std::size_t i = 0; i < p.dimension; ++i) {
            const double lo = std::isfinite(p.lower[i]) ? p.lower[i] : -1.0;
            const double hi = std::isfinite(p.upper[i]) ? p.upper[i] : 1.0;
            x[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
        }
        all.push_back(std::move(x));
    }

    MultiStartReport out;
    std::size_t best = all.size();
    for (std::size_t s = 0; s < all.size(); ++s) {
        SolveReport r;
        try {
            r = solve(p, all[s], opts);
        } catch (const SolverFailure& f) {
            r.message = f.what();
        }
        r.start_index = s;
        out.runs.push_back(std::move(r));
        const SolveReport& cur = out.runs.back();
        if (cur.solution.empty()) continue;
        if (best == all.size()) {
            best = s;
            continue;
        }
        const SolveReport& inc = out.runs[best];
        if (cur.converged != inc.converged) {
            if (cur.converged) best = s;
        } else if (cur.converged) {
            if (cur.objective_value < inc.objective_value) best = s;
        } else if (cur.max_constraint_violation < inc.max_constraint_violation) {
            best = s;
        }
    }
    if (best == all.size()) {
        out.best.converged = false;
        out.best.message = "every start failed";
    } else {
        out.best = out.runs[best];
    }
    return out;
}

}  // namespace ngmpc
