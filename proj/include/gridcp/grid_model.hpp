#pragma once

#include <algorithm>
#include <complex>
#include <map>
#include <vector>

#include <Eigen/SparseCore>

#include "gridcp/common.hpp"

namespace gridcp {

using Complex = std::complex<double>;

enum class BusKind { Slack, PV, PQ };

inline const char* to_string(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "Slack";
        case BusKind::PV: return "PV";
        case BusKind::PQ: return "PQ";
    }
    return "?";
}

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double voltage_setpoint = 1.0; // p.u., meaningful for Slack/PV
    double base_kv = 0.0;
    double p_load = 0.0; // p.u.
    double q_load = 0.0; // p.u.
};

struct Branch {
    int id = 0;
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;          // p.u. series resistance
    double x = 0.0;          // p.u. series reactance
    double b_charging = 0.0; // p.u. total shunt susceptance
    double tap_ratio = 1.0;  // 1.0 = no transformer
    double rating = 0.0;     // p.u. MVA limit
    bool outage_eligible = true;
};

struct Generator {
    int bus = 0;
    double p_set = 0.0; // p.u.
    double q_min = 0.0; // p.u.
    double q_max = 0.0; // p.u.
};

struct GridCase {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    double base_mva = 100.0;

    int bus_pos(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return static_cast<int>(i);
        throw UnknownBusError(bus_id);
    }

    int slack_pos() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].kind == BusKind::Slack) return static_cast<int>(i);
        throw ValidationError("case has no slack bus");
    }

    double total_p_load() const {
        double s = 0.0;
        for (const auto& b : buses) s += b.p_load;
        return s;
    }

    double total_p_set() const {
        double s = 0.0;
        for (const auto& g : generators) s += g.p_set;
        return s;
    }
};

namespace detail {

// connectivity over in-service branches, via union-find
class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }
    bool single_component() {
        if (parent_.empty()) return true;
        const std::size_t root = find(0);
        for (std::size_t i = 1; i < parent_.size(); ++i)
            if (find(i) != root) return false;
        return true;
    }

  private:
    std::vector<std::size_t> parent_;
};

} // namespace detail

inline bool is_connected(const GridCase& grid) {
    if (grid.buses.size() <= 1) return !grid.buses.empty();
    std::map<int, std::size_t> pos;
    for (std::size_t i = 0; i < grid.buses.size(); ++i) pos[grid.buses[i].id] = i;
    detail::UnionFind uf(grid.buses.size());
    for (const auto& br : grid.branches) {
        auto f = pos.find(br.from_bus);
        auto t = pos.find(br.to_bus);
        if (f == pos.end() || t == pos.end()) return false;
        uf.unite(f->second, t->second);
    }
    return uf.single_component();
}

inline void validate_case(const GridCase& grid) {
    if (grid.buses.empty()) throw ValidationError("case has no buses");
    if (!(grid.base_mva > 0)) throw ValidationError("base_mva must be > 0");

    std::map<int, const Bus*> by_id;
    int slack_count = 0;
    for (const auto& b : grid.buses) {
        if (!by_id.emplace(b.id, &b).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::Slack) ++slack_count;
        if (b.kind != BusKind::PQ && !(b.voltage_setpoint > 0))
            throw ValidationError("voltage_setpoint must be > 0 at bus " +
                                  std::to_string(b.id));
    }
    if (slack_count == 0) throw ValidationError("case has no slack bus");
    if (slack_count > 1)
        throw ValidationError("case has " + std::to_string(slack_count) +
                              " slack buses, exactly one allowed");

    std::map<int, int> branch_ids;
    for (const auto& br : grid.branches) {
        if (!branch_ids.emplace(br.id, 0).second)
            throw ValidationError("duplicate branch id " + std::to_string(br.id));
        if (br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.id) + " has x = 0");
        if (!(br.rating > 0))
            throw ValidationError("branch " + std::to_string(br.id) +
                                  " has non-positive rating");
        if (br.from_bus == br.to_bus)
            throw ValidationError("branch " + std::to_string(br.id) +
                                  " connects a bus to itself");
        if (!(br.tap_ratio > 0))
            throw ValidationError("branch " + std::to_string(br.id) +
                                  " has non-positive tap_ratio");
        if (!by_id.count(br.from_bus)) throw UnknownBusError(br.from_bus);
        if (!by_id.count(br.to_bus)) throw UnknownBusError(br.to_bus);
    }

    std::map<int, int> gens_per_bus;
    for (const auto& g : grid.generators) {
        if (!by_id.count(g.bus)) throw UnknownBusError(g.bus);
        if (g.q_min > g.q_max)
            throw ValidationError("generator at bus " + std::to_string(g.bus) +
                                  " has q_min > q_max");
        ++gens_per_bus[g.bus];
    }
    for (const auto& b : grid.buses)
        if (b.kind == BusKind::PV && gens_per_bus[b.id] == 0)
            throw ValidationError("PV bus " + std::to_string(b.id) +
                                  " hosts no generator");

    if (!is_connected(grid))
        throw ValidationError("disconnected: the in-service branch graph does not "
                              "span all buses");
}

// ---------------------------------------------------------------------------
// Pi-equivalent branch model. Series admittance y = 1/(r + jx), half of the
// charging susceptance at each terminal, off-nominal tap on the from side.
// ---------------------------------------------------------------------------

struct BranchAdmittance {
    Complex y_ff, y_ft, y_tf, y_tt;
};

inline BranchAdmittance branch_admittance(const Branch& br) {
    const Complex y_series = 1.0 / Complex(br.r, br.x);
    const Complex y_shunt(0.0, br.b_charging / 2.0);
    const double t = br.tap_ratio;
    return {(y_series + y_shunt) / (t * t), -y_series / t, -y_series / t,
            y_series + y_shunt};
}

inline Eigen::SparseMatrix<Complex> admittance_matrix(const GridCase& grid) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    std::map<int, int> pos;
    for (int i = 0; i < n; ++i) pos[grid.buses[static_cast<std::size_t>(i)].id] = i;

    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(grid.branches.size() * 4);
    for (const auto& br : grid.branches) {
        const auto a = branch_admittance(br);
        const int f = pos.at(br.from_bus);
        const int t = pos.at(br.to_bus);
        trip.emplace_back(f, f, a.y_ff);
        trip.emplace_back(f, t, a.y_ft);
        trip.emplace_back(t, f, a.y_tf);
        trip.emplace_back(t, t, a.y_tt);
    }
    Eigen::SparseMatrix<Complex> y(n, n);
    y.setFromTriplets(trip.begin(), trip.end());
    return y;
}

// Complex power entering the branch at each terminal, in p.u.
struct BranchFlow {
    Complex s_from, s_to;
};

inline BranchFlow branch_flow(const GridCase& grid,
                              const std::vector<Complex>& voltages,
                              const Branch& br) {
    const int f = grid.bus_pos(br.from_bus);
    const int t = grid.bus_pos(br.to_bus);
    if (static_cast<std::size_t>(f) >= voltages.size() ||
        static_cast<std::size_t>(t) >= voltages.size())
        throw UnknownBusError(f >= static_cast<int>(voltages.size()) ? br.from_bus
                                                                     : br.to_bus);
    const auto a = branch_admittance(br);
    const Complex vf = voltages[static_cast<std::size_t>(f)];
    const Complex vt = voltages[static_cast<std::size_t>(t)];
    const Complex i_from = a.y_ff * vf + a.y_ft * vt;
    const Complex i_to = a.y_tf * vf + a.y_tt * vt;
    return {vf * std::conj(i_from), vt * std::conj(i_to)};
}

// Loading ratio: larger of the terminal apparent powers over the rating.
// Values above 1 indicate thermal overload.
inline double line_loading(const GridCase& grid,
                           const std::vector<Complex>& voltages,
                           const Branch& br) {
    const auto flow = branch_flow(grid, voltages, br);
    return std::max(std::abs(flow.s_from), std::abs(flow.s_to)) / br.rating;
}

} // namespace gridcp
