#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <set>
#include <vector>

#include "gridcp/grid_model.hpp"

namespace gridcp {

struct AcOptions {
    double tolerance = 1e-8; // p.u. power mismatch
    int max_iter = 30;
    bool flat_start = true;
};

struct ACSolution {
    Eigen::VectorXd v_mag;  // p.u., aligned with case.buses
    Eigen::VectorXd v_ang;  // rad
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::vector<double> mismatch_history; // per completed iteration
    std::vector<int> pv_to_pq;            // bus ids switched on a q-limit

    std::vector<Complex> voltages() const {
        std::vector<Complex> v(static_cast<std::size_t>(v_mag.size()));
        for (Eigen::Index i = 0; i < v_mag.size(); ++i)
            v[static_cast<std::size_t>(i)] = std::polar(v_mag[i], v_ang[i]);
        return v;
    }
};

struct DCSolution {
    Eigen::VectorXd theta;     // rad, aligned with case.buses, slack = 0
    std::vector<double> flows; // p.u. active power, aligned with case.branches
};

namespace detail {

struct BusSchedule {
    Eigen::VectorXd p_inj;  // scheduled net active injection
    Eigen::VectorXd q_inj;  // scheduled net reactive injection (PQ semantics)
    Eigen::VectorXd q_min;  // aggregate generator limits minus load
    Eigen::VectorXd q_max;
};

inline BusSchedule bus_schedule(const GridCase& grid) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    BusSchedule s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
                  Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    std::map<int, int> pos;
    for (int i = 0; i < n; ++i) pos[grid.buses[static_cast<std::size_t>(i)].id] = i;
    for (int i = 0; i < n; ++i) {
        const auto& b = grid.buses[static_cast<std::size_t>(i)];
        s.p_inj[i] -= b.p_load;
        s.q_inj[i] -= b.q_load;
        s.q_min[i] -= b.q_load;
        s.q_max[i] -= b.q_load;
    }
    for (const auto& g : grid.generators) {
        const int i = pos.at(g.bus);
        s.p_inj[i] += g.p_set;
        s.q_min[i] += g.q_min;
        s.q_max[i] += g.q_max;
        // generators parked at PQ buses contribute their clamped zero-var output
        if (grid.buses[static_cast<std::size_t>(i)].kind == BusKind::PQ)
            s.q_inj[i] += std::clamp(0.0, g.q_min, g.q_max);
    }
    return s;
}

// net complex injection at every bus implied by voltages: S = V .* conj(Y V)
inline void injected_power(const Eigen::SparseMatrix<Complex>& ybus,
                           const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                           Eigen::VectorXd& p, Eigen::VectorXd& q) {
    const auto n = vm.size();
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
    const Eigen::VectorXcd s = v.cwiseProduct((ybus * v).conjugate());
    p = s.real();
    q = s.imag();
}

} // namespace detail

// Newton-Raphson power flow in polar coordinates, dense Jacobian.
// PV buses hold their setpoint until an aggregate generator q-limit binds;
// a violating bus converts to PQ at the limit and never converts back.
inline ACSolution solve_ac(const GridCase& grid, const AcOptions& opt = {}) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    const auto ybus = admittance_matrix(grid);
    const auto sched = detail::bus_schedule(grid);
    const int slack = grid.slack_pos();

    std::vector<BusKind> kind(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        kind[static_cast<std::size_t>(i)] = grid.buses[static_cast<std::size_t>(i)].kind;

    ACSolution sol;
    sol.v_mag.resize(n);
    sol.v_ang = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd q_spec = sched.q_inj;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = grid.buses[static_cast<std::size_t>(i)];
        sol.v_mag[i] = (b.kind == BusKind::PQ) ? 1.0 : b.voltage_setpoint;
        if (!opt.flat_start && b.kind == BusKind::PQ) sol.v_mag[i] = 1.0;
    }

    Eigen::VectorXd p_calc, q_calc;
    auto mismatch_norm = [&]() {
        detail::injected_power(ybus, sol.v_mag, sol.v_ang, p_calc, q_calc);
        double m = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == slack) continue;
            m = std::max(m, std::abs(sched.p_inj[i] - p_calc[i]));
            if (kind[static_cast<std::size_t>(i)] == BusKind::PQ)
                m = std::max(m, std::abs(q_spec[i] - q_calc[i]));
        }
        return m;
    };

    sol.max_mismatch = mismatch_norm();
    if (sol.max_mismatch <= opt.tolerance) {
        sol.converged = true;
        return sol;
    }

    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        // index maps for this iteration's unknowns
        std::vector<Eigen::Index> ang_of, mag_of;
        std::vector<int> ang_pos(static_cast<std::size_t>(n), -1),
            mag_pos(static_cast<std::size_t>(n), -1);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == slack) continue;
            ang_pos[static_cast<std::size_t>(i)] = static_cast<int>(ang_of.size());
            ang_of.push_back(i);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (kind[static_cast<std::size_t>(i)] != BusKind::PQ || i == slack) continue;
            mag_pos[static_cast<std::size_t>(i)] = static_cast<int>(mag_of.size());
            mag_of.push_back(i);
        }
        const auto na = static_cast<Eigen::Index>(ang_of.size());
        const auto nm = static_cast<Eigen::Index>(mag_of.size());
        const auto dim = na + nm;

        Eigen::VectorXd rhs(dim);
        for (Eigen::Index a = 0; a < na; ++a)
            rhs[a] = sched.p_inj[ang_of[static_cast<std::size_t>(a)]] -
                     p_calc[ang_of[static_cast<std::size_t>(a)]];
        for (Eigen::Index m = 0; m < nm; ++m)
            rhs[na + m] = q_spec[mag_of[static_cast<std::size_t>(m)]] -
                          q_calc[mag_of[static_cast<std::size_t>(m)]];

        // dense Jacobian: dP/dtheta, dP/dV, dQ/dtheta, dQ/dV
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
        for (int col = 0; col < ybus.outerSize(); ++col) {
            for (Eigen::SparseMatrix<Complex>::InnerIterator it(ybus, col); it; ++it) {
                const Eigen::Index i = it.row();
                const Eigen::Index j = it.col();
                const double g = it.value().real();
                const double b = it.value().imag();
                const double vi = sol.v_mag[i], vj = sol.v_mag[j];
                const int ai = ang_pos[static_cast<std::size_t>(i)];
                const int aj = ang_pos[static_cast<std::size_t>(j)];
                const int mi = mag_pos[static_cast<std::size_t>(i)];
                const int mj = mag_pos[static_cast<std::size_t>(j)];
                if (i == j) {
                    if (ai >= 0) {
                        jac(ai, ai) += -q_calc[i] - b * vi * vi;
                        if (mi >= 0) jac(ai, na + mi) += p_calc[i] / vi + g * vi;
                    }
                    if (mi >= 0) {
                        jac(na + mi, ai) += p_calc[i] - g * vi * vi;
                        jac(na + mi, na + mi) += q_calc[i] / vi - b * vi;
                    }
                } else {
                    const double th = sol.v_ang[i] - sol.v_ang[j];
                    const double c = std::cos(th), s = std::sin(th);
                    const double dp_dth = vi * vj * (g * s - b * c);
                    const double dq_dth = -vi * vj * (g * c + b * s);
                    const double dp_dv = vi * (g * c + b * s);
                    const double dq_dv = vi * (g * s - b * c);
                    if (ai >= 0 && aj >= 0) jac(ai, aj) += dp_dth;
                    if (ai >= 0 && mj >= 0) jac(ai, na + mj) += dp_dv;
                    if (mi >= 0 && aj >= 0) jac(na + mi, aj) += dq_dth;
                    if (mi >= 0 && mj >= 0) jac(na + mi, na + mj) += dq_dv;
                }
            }
        }

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const Eigen::VectorXd dx = lu.solve(rhs);
        if (!dx.allFinite()) {
            sol.iterations = iter;
            sol.converged = false;
            return sol;
        }
        for (Eigen::Index a = 0; a < na; ++a)
            sol.v_ang[ang_of[static_cast<std::size_t>(a)]] += dx[a];
        for (Eigen::Index m = 0; m < nm; ++m)
            sol.v_mag[mag_of[static_cast<std::size_t>(m)]] += dx[na + m];

        sol.iterations = iter;
        sol.max_mismatch = mismatch_norm();
        sol.mismatch_history.push_back(sol.max_mismatch);

        // single q-limit pass per iteration, no reversion
        bool switched = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (kind[static_cast<std::size_t>(i)] != BusKind::PV || i == slack) continue;
            if (q_calc[i] > sched.q_max[i] + opt.tolerance) {
                kind[static_cast<std::size_t>(i)] = BusKind::PQ;
                q_spec[i] = sched.q_max[i];
                sol.pv_to_pq.push_back(grid.buses[static_cast<std::size_t>(i)].id);
                switched = true;
            } else if (q_calc[i] < sched.q_min[i] - opt.tolerance) {
                kind[static_cast<std::size_t>(i)] = BusKind::PQ;
                q_spec[i] = sched.q_min[i];
                sol.pv_to_pq.push_back(grid.buses[static_cast<std::size_t>(i)].id);
                switched = true;
            }
        }
        if (switched) sol.max_mismatch = mismatch_norm();

        if (sol.max_mismatch <= opt.tolerance) {
            bool positive = true;
            for (Eigen::Index i = 0; i < n; ++i) positive &= sol.v_mag[i] > 0;
            sol.converged = positive;
            return sol;
        }
    }
    sol.converged = false;
    return sol;
}

// Classical DC power flow: B' theta = P over non-slack buses, unit voltage,
// lossless branches, flows = angle difference over reactance.
inline DCSolution solve_dc(const GridCase& grid) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    const int slack = grid.slack_pos();
    std::map<int, int> pos;
    for (int i = 0; i < n; ++i) pos[grid.buses[static_cast<std::size_t>(i)].id] = i;

    // reduced index skipping the slack
    std::vector<int> red(static_cast<std::size_t>(n), -1);
    int r = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != slack) red[static_cast<std::size_t>(i)] = r++;

    Eigen::MatrixXd bmat = Eigen::MatrixXd::Zero(n - 1, n - 1);
    for (const auto& br : grid.branches) {
        const double b = 1.0 / br.x;
        const int f = pos.at(br.from_bus);
        const int t = pos.at(br.to_bus);
        const int rf = red[static_cast<std::size_t>(f)];
        const int rt = red[static_cast<std::size_t>(t)];
        if (rf >= 0) bmat(rf, rf) += b;
        if (rt >= 0) bmat(rt, rt) += b;
        if (rf >= 0 && rt >= 0) {
            bmat(rf, rt) -= b;
            bmat(rt, rf) -= b;
        }
    }

    const auto sched = detail::bus_schedule(grid);
    Eigen::VectorXd p(n - 1);
    for (Eigen::Index i = 0; i < n; ++i)
        if (red[static_cast<std::size_t>(i)] >= 0)
            p[red[static_cast<std::size_t>(i)]] = sched.p_inj[i];

    Eigen::FullPivLU<Eigen::MatrixXd> lu(bmat);
    if (!lu.isInvertible())
        throw SingularSystemError(
            "reduced susceptance matrix is singular (islanded case?)");
    const Eigen::VectorXd theta_red = lu.solve(p);

    DCSolution sol;
    sol.theta = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (red[static_cast<std::size_t>(i)] >= 0)
            sol.theta[i] = theta_red[red[static_cast<std::size_t>(i)]];
    sol.flows.reserve(grid.branches.size());
    for (const auto& br : grid.branches) {
        const int f = pos.at(br.from_bus);
        const int t = pos.at(br.to_bus);
        sol.flows.push_back((sol.theta[f] - sol.theta[t]) / br.x);
    }
    return sol;
}

inline double dc_loading(const GridCase& grid, const DCSolution& dc,
                         const Branch& branch) {
    for (std::size_t i = 0; i < grid.branches.size(); ++i)
        if (grid.branches[i].id == branch.id)
            return std::abs(dc.flows[i]) / branch.rating;
    throw IndexMismatchError("branch " + std::to_string(branch.id) +
                             " not present in DC solution");
}

} // namespace gridcp
